// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"
#include "voxdesc/pretrain/rigid.hpp"

namespace voxdesc::pretrain {

struct NceResult {
  Real loss = 0.0;  // summed over anchors
  MatX df_p, df_q;  // same shapes as the inputs
};

/// Contrastive softmax over matched feature rows: row i of f_p is the
/// anchor, row i of f_q its positive, the other rows of f_q the negatives.
/// The positive stays in the denominator, so with identical rows the loss
/// is exactly n log n. Both inputs are n x d with n >= 2.
NceResult nce_loss(const MatX& f_p, const MatX& f_q, Real tau);

/// Row-stochastic soft assignment from f_p rows to f_q rows: softmax over
/// -|f_i - g_j|^2 / temp. Hardens to the euclidean nearest neighbor as
/// temp -> 0.
MatX soft_correspondence(const MatX& f_p, const MatX& f_q, Real temp);

/// Gradients of a scalar through the soft assignment. `weights` is the
/// forward output; df_p and df_q are assigned, not accumulated.
void soft_correspondence_backward(const MatX& f_p, const MatX& f_q, Real temp,
                                  const MatX& weights, const MatX& upstream,
                                  MatX& df_p, MatX& df_q);

/// Median pairwise squared feature distance between the two sets; the
/// adaptive soft-match temperature used when none is configured.
Real median_sq_dist(const MatX& f_p, const MatX& f_q);

struct CycleGrads {
  Mat3 dr_fwd = Mat3::Zero(), dr_bwd = Mat3::Zero();
  Vec3 dt_fwd = Vec3::Zero(), dt_bwd = Vec3::Zero();
};

/// Composition penalty |R R' - I|_1 + |R t' + t|_1: zero exactly when the
/// two transforms are mutual inverses. The L1 subgradient at 0 is taken
/// as 0.
Real cycle_loss(const RigidTransform& fwd, const RigidTransform& bwd,
                CycleGrads* grads = nullptr);

struct CycleChain {
  Real loss = 0.0;
  RigidTransform fwd, bwd;
  MatX df_p, df_q;
  Real temperature = 0.0;  // the value actually used
};

/// Unsupervised cycle objective between two point sets: soft feature
/// correspondences in both directions, rigid fits onto the soft targets,
/// then the composition penalty, with gradients back to both feature
/// matrices. temp <= 0 picks the median heuristic; the heuristic value is
/// treated as a constant of the step, not differentiated through.
CycleChain cycle_alignment(const Points& p, const Points& q, const MatX& f_p,
                           const MatX& f_q, Real temp);

}  // namespace voxdesc::pretrain
