// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/geom/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "voxdesc/error.hpp"

namespace voxdesc::geom {

void validate(const PointCloud& cloud) {
  if (cloud.points.rows() == 0) throw InvalidInput("point cloud is empty");
  if (!cloud.points.allFinite())
    throw InvalidInput("point cloud contains non-finite coordinates");
  if (cloud.normals.rows() != 0 && cloud.normals.rows() != cloud.points.rows())
    throw InvalidInput("normal count does not match point count");
  if (cloud.normals.rows() != 0 && !cloud.normals.allFinite())
    throw InvalidInput("point cloud contains non-finite normals");
}

void validate(const TriMesh& mesh) {
  if (mesh.vertices.rows() == 0) throw InvalidInput("mesh has no vertices");
  if (!mesh.vertices.allFinite())
    throw InvalidInput("mesh contains non-finite vertices");
  const int n = static_cast<int>(mesh.vertices.rows());
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n)
      throw InvalidInput("face " + std::to_string(f) +
                         " references an out-of-range vertex");
    if (a == b || b == c || a == c)
      throw InvalidInput("face " + std::to_string(f) +
                         " repeats a vertex index");
  }
}

VecX face_areas(const TriMesh& mesh) {
  VecX areas(mesh.faces.rows());
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    areas(f) = 0.5 * (b - a).cross(c - a).norm();
  }
  return areas;
}

Real total_area(const TriMesh& mesh) { return face_areas(mesh).sum(); }

Vec3 area_centroid(const TriMesh& mesh) {
  const VecX areas = face_areas(mesh);
  const Real total = areas.sum();
  if (total <= 0.0) throw InvalidInput("mesh has zero total area");
  Vec3 centroid = Vec3::Zero();
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    centroid += areas(f) / 3.0 * (a + b + c);
  }
  return centroid / total;
}

TriMesh normalize_unit_area(const TriMesh& mesh) {
  validate(mesh);
  const Real area = total_area(mesh);
  if (area <= 0.0) throw InvalidInput("mesh has zero total area");
  const Vec3 centroid = area_centroid(mesh);
  TriMesh out;
  out.faces = mesh.faces;
  out.vertices = (mesh.vertices.rowwise() - centroid.transpose()) /
                 std::sqrt(area);
  return out;
}

Real bounding_box_diagonal(const Points& points) {
  const Vec3 lo = points.colwise().minCoeff();
  const Vec3 hi = points.colwise().maxCoeff();
  return (hi - lo).norm();
}

PointCloud normalize_unit_diagonal(const PointCloud& cloud) {
  validate(cloud);
  const Vec3 lo = cloud.points.colwise().minCoeff();
  const Vec3 hi = cloud.points.colwise().maxCoeff();
  const Real diag = (hi - lo).norm();
  if (diag <= 0.0)
    throw InvalidInput("cannot normalize a cloud with zero extent");
  PointCloud out;
  out.points =
      (cloud.points.rowwise() - (0.5 * (lo + hi)).transpose()) / diag;
  out.normals = cloud.normals;
  return out;
}

std::vector<std::array<int, 2>> mesh_edges(const TriMesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(static_cast<std::size_t>(mesh.faces.rows()) * 3);
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    for (int e = 0; e < 3; ++e) {
      int u = mesh.faces(f, e);
      int v = mesh.faces(f, (e + 1) % 3);
      if (u > v) std::swap(u, v);
      edges.push_back({u, v});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

PointCloud cloud_from_mesh(const TriMesh& mesh) {
  PointCloud cloud;
  cloud.points = mesh.vertices;
  return cloud;
}

}  // namespace voxdesc::geom
