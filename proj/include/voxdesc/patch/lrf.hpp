// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"
#include "voxdesc/geom/knn.hpp"
#include "voxdesc/geom/mesh.hpp"

namespace voxdesc::patch {

/// Local reference frame at a point: orthonormal, right-handed.
struct Lrf {
  Mat3 axes;    // columns are the x/y/z axes in world coordinates
  Vec3 origin;  // anchor position
  // Covariance spectrum too isotropic to pick directions; axes fall back to
  // the world frame so downstream code can keep going, but callers should
  // police the rate.
  bool degenerate = false;
};

struct LrfConfig {
  Real radius = 0.12;     // neighborhood support, cloud units
  int min_neighbors = 8;  // below this the frame is unreliable -> error
};

/// Covariance frame of the radius neighborhood. The z axis is the smallest
/// principal direction, x the largest; both signs are fixed by the side with
/// the larger summed displacement, and y completes a right-handed frame, so
/// the frame co-rotates with the cloud. Rotationally symmetric neighborhoods
/// leave the in-plane direction genuinely ambiguous; generic data does not
/// hit that case. A relative eigengap below 1e-9 on either side of the
/// spectrum returns the world axes with `degenerate` set instead of picking
/// arbitrary eigenvectors.
Lrf estimate_lrf(const geom::PointCloud& cloud, Index center,
                 const LrfConfig& config,
                 const geom::UniformGrid* accel = nullptr);

/// Points inside the LRF-aligned cube of half-width margin * scale around
/// the anchor, in LRF coordinates (rows). The anchor itself is included.
Points extract_patch(const geom::PointCloud& cloud, Index center,
                     const Lrf& lrf, Real scale, Real margin,
                     const geom::UniformGrid* accel = nullptr);

}  // namespace voxdesc::patch
