// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/geom/knn.hpp"

#include <algorithm>
#include <cmath>

#include "voxdesc/error.hpp"

namespace voxdesc::geom {

Eigen::MatrixXi nearest_neighbors(Eigen::Ref<const MatX> points,
                                  Eigen::Ref<const MatX> queries, int k) {
  const Index n = points.rows();
  const Index m = queries.rows();
  if (k <= 0 || k > n)
    throw InvalidInput("nearest_neighbors: k must be in [1, n]");
  if (points.cols() != queries.cols())
    throw InvalidInput("nearest_neighbors: dimension mismatch");

  Eigen::MatrixXi result(m, k);
  std::vector<std::pair<Real, int>> dist(static_cast<std::size_t>(n));
  for (Index q = 0; q < m; ++q) {
    for (Index i = 0; i < n; ++i)
      dist[static_cast<std::size_t>(i)] = {
          (points.row(i) - queries.row(q)).squaredNorm(),
          static_cast<int>(i)};
    // Lexicographic (distance, index) order makes ties deterministic.
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + k);
    for (int j = 0; j < k; ++j)
      result(q, j) = dist[static_cast<std::size_t>(j)].second;
  }
  return result;
}

IndexVec nearest_neighbor(Eigen::Ref<const MatX> points,
                          Eigen::Ref<const MatX> queries) {
  const Eigen::MatrixXi nn = nearest_neighbors(points, queries, 1);
  return nn.col(0);
}

UniformGrid::UniformGrid(const Points& points, Real cell_size)
    : points_(points), cell_(cell_size) {
  if (points.rows() == 0) throw InvalidInput("UniformGrid: empty point set");
  if (!(cell_size > 0.0)) throw InvalidInput("UniformGrid: cell size <= 0");
  origin_ = points.colwise().minCoeff();
  for (Index i = 0; i < points.rows(); ++i) {
    const Vec3 p = points.row(i);
    const int ix = static_cast<int>(std::floor((p.x() - origin_.x()) / cell_));
    const int iy = static_cast<int>(std::floor((p.y() - origin_.y()) / cell_));
    const int iz = static_cast<int>(std::floor((p.z() - origin_.z()) / cell_));
    buckets_[key(ix, iy, iz)].push_back(static_cast<int>(i));
  }
}

std::int64_t UniformGrid::key(int ix, int iy, int iz) const {
  // 21 bits per axis, offset to keep coordinates non-negative.
  const std::int64_t base = 1 << 20;
  return (((std::int64_t)(ix + base)) << 42) |
         (((std::int64_t)(iy + base)) << 21) | (std::int64_t)(iz + base);
}

std::vector<int> UniformGrid::radius_search(const Vec3& center,
                                            Real radius) const {
  std::vector<int> out;
  const Real r2 = radius * radius;
  const int lo[3] = {
      static_cast<int>(std::floor((center.x() - radius - origin_.x()) / cell_)),
      static_cast<int>(std::floor((center.y() - radius - origin_.y()) / cell_)),
      static_cast<int>(std::floor((center.z() - radius - origin_.z()) / cell_))};
  const int hi[3] = {
      static_cast<int>(std::floor((center.x() + radius - origin_.x()) / cell_)),
      static_cast<int>(std::floor((center.y() + radius - origin_.y()) / cell_)),
      static_cast<int>(std::floor((center.z() + radius - origin_.z()) / cell_))};
  for (int ix = lo[0]; ix <= hi[0]; ++ix)
    for (int iy = lo[1]; iy <= hi[1]; ++iy)
      for (int iz = lo[2]; iz <= hi[2]; ++iz) {
        const auto it = buckets_.find(key(ix, iy, iz));
        if (it == buckets_.end()) continue;
        for (const int idx : it->second)
          if ((Vec3(points_.row(idx)) - center).squaredNorm() <= r2)
            out.push_back(idx);
      }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace voxdesc::geom
