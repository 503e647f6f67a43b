// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "voxdesc/core.hpp"

namespace voxdesc::match {

/// Vertex-to-vertex map between two shapes. `targets(i)` is the matched
/// vertex on the other shape; an empty `valid` vector means every entry
/// counts, otherwise zero entries are excluded from fits and metrics.
struct PointToPointMap {
  IndexVec targets;
  std::vector<std::uint8_t> valid;

  Index size() const { return targets.size(); }
  bool is_valid(Index i) const {
    return valid.empty() || valid[static_cast<std::size_t>(i)] != 0;
  }
  Index valid_count() const;
};

struct NnMaps {
  PointToPointMap t12;  // per vertex of shape 1, its match on shape 2
  PointToPointMap t21;
};

/// Exact feature-space nearest-neighbor maps in both directions. Ties go to
/// the lower index, so duplicated feature rows stay deterministic.
NnMaps pointwise_map(const MatX& f1, const MatX& f2);

/// Mutual check: entry x survives iff t21[t12[x]] == x. Returns t12 with
/// the validity mask filled in; run with the arguments swapped for the
/// other direction, which keeps the same pair set with roles reversed.
PointToPointMap mutual_filter(const PointToPointMap& t12,
                              const PointToPointMap& t21);

}  // namespace voxdesc::match
