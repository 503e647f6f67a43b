// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/geom/mesh.hpp"

namespace voxdesc::geom {

/// Shortest-path geodesic approximation on the edge graph, augmented with
/// one extra edge per interior mesh edge: the two incident triangles are
/// unfolded into a plane and the opposite vertices are connected when the
/// straight segment between them crosses the shared edge. This removes most
/// of the lattice anisotropy of plain edge-graph Dijkstra.
class GeodesicGraph {
 public:
  explicit GeodesicGraph(const TriMesh& mesh);

  /// Distances from one source vertex to all vertices (Dijkstra).
  VecX distances(int source) const;

  Index n_vertices() const { return n_; }

 private:
  struct Arc {
    int to;
    Real len;
  };
  Index n_;
  std::vector<std::vector<Arc>> adj_;
};

/// One-shot convenience wrapper.
VecX geodesic_distances(const TriMesh& mesh, int source);

}  // namespace voxdesc::geom
