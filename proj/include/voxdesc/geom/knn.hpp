// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "voxdesc/core.hpp"

namespace voxdesc::geom {

/// Exact k-nearest-neighbor search, any dimension, one point per row.
/// Returns a (queries.rows() x k) index matrix; neighbors are ordered by
/// squared distance, ties broken by the lower point index.
Eigen::MatrixXi nearest_neighbors(Eigen::Ref<const MatX> points,
                                  Eigen::Ref<const MatX> queries, int k);

/// Single nearest neighbor per query row.
IndexVec nearest_neighbor(Eigen::Ref<const MatX> points,
                          Eigen::Ref<const MatX> queries);

/// Hash-grid accelerator for fixed-radius queries on 3-D point sets.
class UniformGrid {
 public:
  UniformGrid(const Points& points, Real cell_size);

  /// Indices of points with ||p - center|| <= radius, ascending.
  /// radius may exceed the cell size; the scan widens accordingly.
  std::vector<int> radius_search(const Vec3& center, Real radius) const;

 private:
  std::int64_t key(int ix, int iy, int iz) const;
  const Points points_;
  Real cell_;
  Vec3 origin_;
  std::unordered_map<std::int64_t, std::vector<int>> buckets_;
};

}  // namespace voxdesc::geom
