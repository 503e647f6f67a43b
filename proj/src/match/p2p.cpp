// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/match/p2p.hpp"

#include "voxdesc/error.hpp"
#include "voxdesc/geom/knn.hpp"

namespace voxdesc::match {

Index PointToPointMap::valid_count() const {
  if (valid.empty()) return targets.size();
  Index n = 0;
  for (Index i = 0; i < targets.size(); ++i)
    if (is_valid(i)) ++n;
  return n;
}

NnMaps pointwise_map(const MatX& f1, const MatX& f2) {
  if (f1.rows() < 1 || f2.rows() < 1)
    throw InvalidInput("pointwise_map: empty feature set");
  if (f1.cols() != f2.cols())
    throw InvalidInput("pointwise_map: feature dimensions disagree");
  NnMaps out;
  out.t12.targets = geom::nearest_neighbor(f2, f1);
  out.t21.targets = geom::nearest_neighbor(f1, f2);
  return out;
}

PointToPointMap mutual_filter(const PointToPointMap& t12,
                              const PointToPointMap& t21) {
  PointToPointMap out;
  out.targets = t12.targets;
  out.valid.assign(static_cast<std::size_t>(t12.size()), 0);
  for (Index x = 0; x < t12.size(); ++x) {
    const Index y = t12.targets(x);
    if (y < 0 || y >= t21.size())
      throw InvalidInput("mutual_filter: map target out of range");
    if (t12.is_valid(x) && t21.is_valid(y) && t21.targets(y) == x)
      out.valid[static_cast<std::size_t>(x)] = 1;
  }
  return out;
}

}  // namespace voxdesc::match
