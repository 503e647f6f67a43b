// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/geom/geodesic.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <queue>

#include "voxdesc/error.hpp"

namespace voxdesc::geom {

namespace {

// Planar coordinates of the vertex opposite edge (u, v) after unfolding its
// triangle into the plane with u at the origin and v at (L, 0).
Vec3 unfold_apex(const Vec3& u, const Vec3& v, const Vec3& apex, Real len) {
  const Real du = (apex - u).norm();
  const Real dv = (apex - v).norm();
  const Real x = (du * du + len * len - dv * dv) / (2.0 * len);
  const Real y2 = du * du - x * x;
  return Vec3(x, std::sqrt(std::max(y2, 0.0)), 0.0);
}

}  // namespace

GeodesicGraph::GeodesicGraph(const TriMesh& mesh) : n_(mesh.n_vertices()) {
  validate(mesh);
  adj_.assign(static_cast<std::size_t>(n_), {});

  auto add_edge = [this](int a, int b, Real len) {
    adj_[static_cast<std::size_t>(a)].push_back({b, len});
    adj_[static_cast<std::size_t>(b)].push_back({a, len});
  };

  for (const auto& e : mesh_edges(mesh)) {
    const Real len =
        (mesh.vertices.row(e[0]) - mesh.vertices.row(e[1])).norm();
    add_edge(e[0], e[1], len);
  }

  // Collect opposite vertices per undirected edge.
  std::map<std::pair<int, int>, std::vector<int>> opposite;
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      int a = mesh.faces(f, c);
      int b = mesh.faces(f, (c + 1) % 3);
      const int apex = mesh.faces(f, (c + 2) % 3);
      if (a > b) std::swap(a, b);
      opposite[{a, b}].push_back(apex);
    }
  }

  for (const auto& [edge, apexes] : opposite) {
    if (apexes.size() != 2) continue;  // boundary or non-manifold edge
    const Vec3 u = mesh.vertices.row(edge.first);
    const Vec3 v = mesh.vertices.row(edge.second);
    const Real len = (v - u).norm();
    if (!(len > 0.0)) continue;
    Vec3 a = unfold_apex(u, v, mesh.vertices.row(apexes[0]), len);
    Vec3 b = unfold_apex(u, v, mesh.vertices.row(apexes[1]), len);
    b.y() = -b.y();
    const Real dy = a.y() - b.y();
    if (!(dy > 0.0)) continue;
    // The shortcut is only a geodesic if the straight segment between the
    // unfolded apexes actually crosses the shared edge.
    const Real cross_x = a.x() + (b.x() - a.x()) * (a.y() / dy);
    if (cross_x < 0.0 || cross_x > len) continue;
    add_edge(apexes[0], apexes[1], (a - b).norm());
  }
}

VecX GeodesicGraph::distances(int source) const {
  if (source < 0 || source >= n_)
    throw InvalidInput("geodesic distances: source vertex out of range");
  const Real inf = std::numeric_limits<Real>::infinity();
  VecX dist = VecX::Constant(n_, inf);
  dist(source) = 0.0;
  using Item = std::pair<Real, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, vertex] = heap.top();
    heap.pop();
    if (d > dist(vertex)) continue;
    for (const Arc& arc : adj_[static_cast<std::size_t>(vertex)]) {
      const Real candidate = d + arc.len;
      if (candidate < dist(arc.to)) {
        dist(arc.to) = candidate;
        heap.push({candidate, arc.to});
      }
    }
  }
  return dist;
}

VecX geodesic_distances(const TriMesh& mesh, int source) {
  return GeodesicGraph(mesh).distances(source);
}

}  // namespace voxdesc::geom
