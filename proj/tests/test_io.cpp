// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "voxdesc/data/io.hpp"
#include "voxdesc/data/synthetic.hpp"
#include "voxdesc/error.hpp"
#include "voxdesc/rng.hpp"

using namespace voxdesc;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "voxdesc_io";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string scratch(const std::string& name) {
  return (scratch_dir() / name).string();
}

// Keep the first `lines` lines of a text file.
void truncate_lines(const std::string& path, int lines) {
  std::ifstream in(path);
  std::string keep, line;
  for (int i = 0; i < lines && std::getline(in, line); ++i) keep += line + "\n";
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << keep;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("meshes round trip through OFF and PLY exactly") {
  const auto mesh = data::icosphere(1, 0.73);
  for (const char* name : {"sphere.off", "sphere.ply"}) {
    const std::string path = scratch(name);
    data::save_mesh(path, mesh);
    const auto back = data::load_mesh(path);
    CHECK((back.vertices - mesh.vertices).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.faces == mesh.faces));
  }
}

TEST_CASE("clouds round trip with and without normals") {
  const auto pair =
      data::gen_rigid_fragment_pair(data::RigidPairConfig{}, 12);
  const std::string path = scratch("cloud.ply");

  data::save_cloud(path, pair.first);
  const auto back = data::load_cloud(path);
  CHECK((back.points - pair.first.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.has_normals() == pair.first.has_normals());
  if (back.has_normals())
    CHECK((back.normals - pair.first.normals).cwiseAbs().maxCoeff() == 0.0);

  geom::PointCloud bare;
  bare.points = pair.first.points;
  data::save_cloud(path, bare);
  CHECK(!data::load_cloud(path).has_normals());
}

TEST_CASE("truncated files report the failing line") {
  const auto mesh = data::icosphere(1);
  const std::string path = scratch("cut.off");
  data::save_mesh(path, mesh);
  truncate_lines(path, 6);
  try {
    (void)data::load_mesh(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("cut.off:6") != std::string::npos);
    CHECK(what.find("end of file") != std::string::npos);
  }
}

TEST_CASE("malformed content points at its line") {
  const std::string path = scratch("bad.off");
  {
    std::ofstream out(path);
    out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 oops 0\n3 0 1 2\n";
  }
  try {
    (void)data::load_mesh(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":5") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
  }
  CHECK_THROWS_AS((void)data::load_mesh(path), ParseError);
}

TEST_CASE("format dispatch rejects unknown extensions and wrong kinds") {
  const auto mesh = data::icosphere(1);
  CHECK_THROWS_AS(data::save_mesh(scratch("m.obj"), mesh), InvalidInput);
  CHECK_THROWS_AS((void)data::load_mesh(scratch("missing.ply")), ParseError);

  // A mesh PLY has faces, so the cloud loader refuses it.
  const std::string path = scratch("meshy.ply");
  data::save_mesh(path, mesh);
  CHECK_THROWS_AS((void)data::load_cloud(path), ParseError);

  // And a cloud PLY has no face element, so the mesh loader refuses that.
  geom::PointCloud cloud;
  cloud.points = mesh.vertices;
  const std::string cpath = scratch("cloudy.ply");
  data::save_cloud(cpath, cloud);
  CHECK_THROWS_AS((void)data::load_mesh(cpath), ParseError);
}

TEST_CASE("csv round trips doubles bit-exactly") {
  Rng rng(60);
  MatX table(40, 3);
  for (Index i = 0; i < table.rows(); ++i) {
    table(i, 0) = static_cast<Real>(i);
    table(i, 1) = rng.normal() * 1e-12;
    table(i, 2) = rng.normal() * 1e9;
  }
  const std::string path = scratch("table.csv");
  data::write_csv(path, {"idx", "tiny", "huge"}, table);

  std::vector<std::string> names;
  const MatX back = data::read_csv(path, &names);
  CHECK(names == std::vector<std::string>{"idx", "tiny", "huge"});
  REQUIRE(back.rows() == table.rows());
  CHECK((back - table).cwiseAbs().maxCoeff() == 0.0);

  // Byte-identical on rewrite, which the reproducibility contract leans on.
  const std::string again = scratch("table2.csv");
  data::write_csv(again, names, back);
  CHECK(data::hash_file(path) == data::hash_file(again));
}

TEST_CASE("csv readers reject ragged or non-numeric rows") {
  const std::string path = scratch("bad.csv");
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n3\n";
  }
  try {
    (void)data::read_csv(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << "a,b\n1,x\n";
  }
  CHECK_THROWS_AS((void)data::read_csv(path), ParseError);
  CHECK_THROWS_AS(data::write_csv(path, {"a"}, MatX::Zero(1, 2)), InvalidInput);
}

TEST_CASE("file hashes separate different contents") {
  const std::string a = scratch("ha.csv");
  const std::string b = scratch("hb.csv");
  data::write_csv(a, {"v"}, MatX::Constant(1, 1, 1.0));
  data::write_csv(b, {"v"}, MatX::Constant(1, 1, 2.0));
  CHECK(data::hash_file(a) != data::hash_file(b));
  CHECK(data::hash_file(a).size() == 16);
}

}  // TEST_SUITE
