// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"

namespace voxdesc::pretrain {

/// Rigid motion x -> R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

RigidTransform inverse(const RigidTransform& t);

/// a after b: x -> a(b(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

Points apply(const RigidTransform& t, const Points& x);

/// Weighted orthogonal Procrustes: argmin over (R, t) of
/// sum_i w_i |R x_i + t - y_i|^2, solved in closed form from the SVD of the
/// weighted cross-covariance, reflection-corrected to det R = +1.
/// Collinear effective point sets leave the rotation underdetermined and
/// are rejected.
RigidTransform weighted_rigid_fit(const Points& x, const Points& y,
                                  const VecX& weights);

struct RigidFitGrads {
  Points dx;
  Points dy;
  VecX dweights;
};

/// Reverse-mode gradients through the closed-form fit; upstream_r and
/// upstream_t hold dL/dR and dL/dt. The rotation part runs through the SVD
/// differential; a nearly degenerate singular spectrum falls back to finite
/// differences on the 3x3 cross-covariance, where the rotation is still
/// smooth.
RigidFitGrads weighted_rigid_fit_backward(const Points& x, const Points& y,
                                          const VecX& weights,
                                          const Mat3& upstream_r,
                                          const Vec3& upstream_t);

}  // namespace voxdesc::pretrain
