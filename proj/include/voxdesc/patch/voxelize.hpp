// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"

namespace voxdesc::patch {

struct VoxelizeConfig {
  int resolution = 16;
  Real sigma = 1e-3;  // Gaussian falloff in normalized cube units (squared)
};

/// Number of cells in the flattened grid.
inline Index grid_size(const VoxelizeConfig& config) {
  return static_cast<Index>(config.resolution) * config.resolution *
         config.resolution;
}

inline Index grid_index(const VoxelizeConfig& config, int ix, int iy, int iz) {
  return (static_cast<Index>(ix) * config.resolution + iy) *
             config.resolution +
         iz;
}

/// Soft occupancy grid of a local patch at receptive-field scale `scale`.
///
/// Each point p (LRF coordinates) lands at u = p / (2 scale) + 0.5 in the
/// unit cube; every voxel with center g accumulates w = exp(-|u - g|^2 /
/// sigma) and the voxel value is the complement-product union
/// v = 1 - prod(1 - w). Values are in [0, 1]; an empty patch gives zeros.
VecX voxelize(const Points& local_points, Real scale,
              const VoxelizeConfig& config);

/// d(loss)/d(scale) for upstream = d(loss)/d(grid), evaluated at the same
/// inputs as voxelize. Uses the exact leave-one-out product form, guarded
/// against fully saturated voxels.
Real voxelize_backward(const Points& local_points, Real scale,
                       const VoxelizeConfig& config, const VecX& upstream);

}  // namespace voxdesc::patch
