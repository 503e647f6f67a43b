// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/data/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "voxdesc/error.hpp"
#include "voxdesc/hash.hpp"

namespace voxdesc::data {
namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

[[noreturn]] void fail(const std::string& path, Index line,
                       const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

// Line reader that counts lines and skips blanks and # comments.
struct LineCursor {
  std::ifstream in;
  std::string path;
  Index line = 0;

  explicit LineCursor(const std::string& p) : in(p), path(p) {
    if (!in) throw ParseError(path + ": cannot open for reading");
  }

  bool next(std::string& out) {
    while (std::getline(in, out)) {
      ++line;
      const auto start = out.find_first_not_of(" \t\r");
      if (start == std::string::npos || out[start] == '#') continue;
      if (out.back() == '\r') out.pop_back();
      return true;
    }
    return false;
  }

  std::string need(const std::string& what) {
    std::string out;
    if (!next(out)) fail(path, line, "unexpected end of file, expected " + what);
    return out;
  }
};

struct FileWriter {
  std::FILE* f;
  std::string path;

  explicit FileWriter(const std::string& p)
      : f(std::fopen(p.c_str(), "w")), path(p) {
    if (f == nullptr) throw ParseError(path + ": cannot open for writing");
  }
  ~FileWriter() {
    if (f != nullptr) std::fclose(f);
  }
  FileWriter(const FileWriter&) = delete;
  FileWriter& operator=(const FileWriter&) = delete;

  void close() {
    const bool bad = std::ferror(f) != 0 || std::fclose(f) != 0;
    f = nullptr;
    if (bad) throw ParseError(path + ": write failed");
  }
};

Real parse_real(LineCursor& cur, const std::string& token) {
  std::size_t used = 0;
  Real value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    fail(cur.path, cur.line, "expected a number, got '" + token + "'");
  }
  if (used != token.size())
    fail(cur.path, cur.line, "trailing characters in '" + token + "'");
  return value;
}

Index parse_index(LineCursor& cur, const std::string& token) {
  const Real v = parse_real(cur, token);
  const auto idx = static_cast<Index>(v);
  if (static_cast<Real>(idx) != v)
    fail(cur.path, cur.line, "expected an integer, got '" + token + "'");
  return idx;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

MatX parse_point_rows(LineCursor& cur, Index count, int columns) {
  MatX rows(count, columns);
  for (Index i = 0; i < count; ++i) {
    const auto toks = split_ws(cur.need("a vertex row"));
    if (static_cast<int>(toks.size()) != columns)
      fail(cur.path, cur.line,
           "expected " + std::to_string(columns) + " numbers, got " +
               std::to_string(toks.size()));
    for (int c = 0; c < columns; ++c)
      rows(i, c) = parse_real(cur, toks[static_cast<std::size_t>(c)]);
  }
  return rows;
}

Faces parse_face_rows(LineCursor& cur, Index count, Index n_vertices) {
  Faces faces(count, 3);
  for (Index i = 0; i < count; ++i) {
    const auto toks = split_ws(cur.need("a face row"));
    if (toks.size() != 4 || toks[0] != "3")
      fail(cur.path, cur.line, "expected a triangle (4 tokens starting with 3)");
    for (int c = 0; c < 3; ++c) {
      const Index v = parse_index(cur, toks[static_cast<std::size_t>(c + 1)]);
      if (v < 0 || v >= n_vertices)
        fail(cur.path, cur.line, "vertex index out of range");
      faces(i, c) = v;
    }
  }
  return faces;
}

template <class Rows>
void write_point_row(FileWriter& out, const Rows& rows, Index i, int cols) {
  char buf[64];
  for (int c = 0; c < cols; ++c) {
    std::snprintf(buf, sizeof(buf), "%.17g", rows(i, c));
    std::fprintf(out.f, c + 1 == cols ? "%s\n" : "%s ", buf);
  }
}

void save_mesh_off(const std::string& path, const geom::TriMesh& mesh) {
  FileWriter out(path);
  std::fprintf(out.f, "OFF\n%lld %lld 0\n",
               static_cast<long long>(mesh.n_vertices()),
               static_cast<long long>(mesh.n_faces()));
  for (Index i = 0; i < mesh.n_vertices(); ++i)
    write_point_row(out, mesh.vertices, i, 3);
  for (Index i = 0; i < mesh.n_faces(); ++i)
    std::fprintf(out.f, "3 %lld %lld %lld\n",
                 static_cast<long long>(mesh.faces(i, 0)),
                 static_cast<long long>(mesh.faces(i, 1)),
                 static_cast<long long>(mesh.faces(i, 2)));
  out.close();
}

geom::TriMesh load_mesh_off(const std::string& path) {
  LineCursor cur(path);
  if (cur.need("the OFF magic") != "OFF")
    fail(path, cur.line, "not an OFF file");
  const auto counts = split_ws(cur.need("the count line"));
  if (counts.size() != 3)
    fail(path, cur.line, "expected 'vertices faces edges'");
  const Index nv = parse_index(cur, counts[0]);
  const Index nf = parse_index(cur, counts[1]);
  geom::TriMesh mesh;
  mesh.vertices = parse_point_rows(cur, nv, 3);
  mesh.faces = parse_face_rows(cur, nf, nv);
  geom::validate(mesh);
  return mesh;
}

void write_ply_header(FileWriter& out, Index nv, bool normals, Index nf,
                      bool with_faces) {
  std::fprintf(out.f, "ply\nformat ascii 1.0\n");
  std::fprintf(out.f, "element vertex %lld\n", static_cast<long long>(nv));
  std::fprintf(out.f, "property double x\nproperty double y\nproperty double z\n");
  if (normals)
    std::fprintf(out.f,
                 "property double nx\nproperty double ny\nproperty double nz\n");
  if (with_faces) {
    std::fprintf(out.f, "element face %lld\n", static_cast<long long>(nf));
    std::fprintf(out.f, "property list uchar int vertex_indices\n");
  }
  std::fprintf(out.f, "end_header\n");
}

struct PlyLayout {
  Index n_vertices = 0;
  Index n_faces = 0;
  bool has_normals = false;
  bool has_faces = false;
};

PlyLayout parse_ply_header(LineCursor& cur) {
  if (cur.need("the ply magic") != "ply") fail(cur.path, cur.line, "not a PLY file");
  if (cur.need("the format line") != "format ascii 1.0")
    fail(cur.path, cur.line, "only 'format ascii 1.0' is supported");

  PlyLayout layout;
  std::vector<std::string> vertex_props;
  std::string element;  // element whose properties we are reading
  for (;;) {
    const std::string line = cur.need("end_header");
    const auto toks = split_ws(line);
    if (toks[0] == "end_header") break;
    if (toks[0] == "element") {
      if (toks.size() != 3) fail(cur.path, cur.line, "malformed element line");
      element = toks[1];
      if (element == "vertex")
        layout.n_vertices = parse_index(cur, toks[2]);
      else if (element == "face") {
        layout.n_faces = parse_index(cur, toks[2]);
        layout.has_faces = true;
      } else
        fail(cur.path, cur.line, "unsupported element '" + element + "'");
    } else if (toks[0] == "property") {
      if (element == "vertex") {
        if (toks.size() != 3 || (toks[1] != "double" && toks[1] != "float"))
          fail(cur.path, cur.line, "unsupported vertex property");
        vertex_props.push_back(toks[2]);
      } else if (element == "face") {
        if (line != "property list uchar int vertex_indices" &&
            line != "property list uint8 int32 vertex_indices")
          fail(cur.path, cur.line, "unsupported face property");
      } else {
        fail(cur.path, cur.line, "property before any element");
      }
    } else {
      fail(cur.path, cur.line, "unexpected header line '" + toks[0] + "'");
    }
  }

  const std::vector<std::string> xyz = {"x", "y", "z"};
  const std::vector<std::string> xyzn = {"x", "y", "z", "nx", "ny", "nz"};
  if (vertex_props == xyzn)
    layout.has_normals = true;
  else if (vertex_props != xyz)
    fail(cur.path, cur.line, "vertex properties must be x y z [nx ny nz]");
  return layout;
}

}  // namespace

void save_mesh(const std::string& path, const geom::TriMesh& mesh) {
  geom::validate(mesh);
  if (ends_with(path, ".off")) {
    save_mesh_off(path, mesh);
    return;
  }
  if (!ends_with(path, ".ply"))
    throw InvalidInput("save_mesh: unknown extension on '" + path + "'");
  FileWriter out(path);
  write_ply_header(out, mesh.n_vertices(), false, mesh.n_faces(), true);
  for (Index i = 0; i < mesh.n_vertices(); ++i)
    write_point_row(out, mesh.vertices, i, 3);
  for (Index i = 0; i < mesh.n_faces(); ++i)
    std::fprintf(out.f, "3 %lld %lld %lld\n",
                 static_cast<long long>(mesh.faces(i, 0)),
                 static_cast<long long>(mesh.faces(i, 1)),
                 static_cast<long long>(mesh.faces(i, 2)));
  out.close();
}

geom::TriMesh load_mesh(const std::string& path) {
  if (ends_with(path, ".off")) return load_mesh_off(path);
  if (!ends_with(path, ".ply"))
    throw InvalidInput("load_mesh: unknown extension on '" + path + "'");
  LineCursor cur(path);
  const PlyLayout layout = parse_ply_header(cur);
  if (!layout.has_faces)
    fail(path, cur.line, "mesh PLY is missing the face element");
  geom::TriMesh mesh;
  const MatX rows =
      parse_point_rows(cur, layout.n_vertices, layout.has_normals ? 6 : 3);
  mesh.vertices = rows.leftCols(3);
  mesh.faces = parse_face_rows(cur, layout.n_faces, layout.n_vertices);
  geom::validate(mesh);
  return mesh;
}

void save_cloud(const std::string& path, const geom::PointCloud& cloud) {
  geom::validate(cloud);
  if (!ends_with(path, ".ply"))
    throw InvalidInput("save_cloud: unknown extension on '" + path + "'");
  FileWriter out(path);
  const bool normals = cloud.has_normals();
  write_ply_header(out, cloud.size(), normals, 0, false);
  MatX rows;
  if (normals) {
    rows.resize(cloud.size(), 6);
    rows << cloud.points, cloud.normals;
    for (Index i = 0; i < cloud.size(); ++i) write_point_row(out, rows, i, 6);
  } else {
    for (Index i = 0; i < cloud.size(); ++i)
      write_point_row(out, cloud.points, i, 3);
  }
  out.close();
}

geom::PointCloud load_cloud(const std::string& path) {
  if (!ends_with(path, ".ply"))
    throw InvalidInput("load_cloud: unknown extension on '" + path + "'");
  LineCursor cur(path);
  const PlyLayout layout = parse_ply_header(cur);
  if (layout.has_faces && layout.n_faces > 0)
    fail(path, cur.line, "point cloud PLY has faces; use load_mesh");
  geom::PointCloud cloud;
  const MatX rows =
      parse_point_rows(cur, layout.n_vertices, layout.has_normals ? 6 : 3);
  cloud.points = rows.leftCols(3);
  if (layout.has_normals) cloud.normals = rows.rightCols(3);
  geom::validate(cloud);
  return cloud;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const MatX& rows) {
  if (columns.empty() || static_cast<Index>(columns.size()) != rows.cols())
    throw InvalidInput("write_csv: header width does not match the data");
  FileWriter out(path);
  for (std::size_t c = 0; c < columns.size(); ++c)
    std::fprintf(out.f, c + 1 == columns.size() ? "%s\n" : "%s,",
                 columns[c].c_str());
  char buf[64];
  for (Index i = 0; i < rows.rows(); ++i)
    for (Index c = 0; c < rows.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", rows(i, c));
      std::fprintf(out.f, c + 1 == rows.cols() ? "%s\n" : "%s,", buf);
    }
  out.close();
}

MatX read_csv(const std::string& path, std::vector<std::string>* columns) {
  LineCursor cur(path);
  const std::string header = cur.need("a header line");
  std::vector<std::string> names;
  {
    std::stringstream ss(header);
    std::string field;
    while (std::getline(ss, field, ',')) names.push_back(field);
  }
  if (names.empty()) fail(path, cur.line, "empty header");
  if (columns != nullptr) *columns = names;

  const Index width = static_cast<Index>(names.size());
  std::vector<Real> values;
  std::string line;
  while (cur.next(line)) {
    std::stringstream ss(line);
    std::string field;
    Index got = 0;
    while (std::getline(ss, field, ',')) {
      values.push_back(parse_real(cur, field));
      ++got;
    }
    if (got != width)
      fail(path, cur.line,
           "expected " + std::to_string(width) + " fields, got " +
               std::to_string(got));
  }
  const Index n = static_cast<Index>(values.size()) / width;
  MatX out(n, width);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < width; ++c) out(i, c) = values[static_cast<std::size_t>(i * width + c)];
  return out;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open for reading");
  Fnv1a hash;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    hash.update(buf, static_cast<std::size_t>(in.gcount()));
  return hash.hex();
}

}  // namespace voxdesc::data
