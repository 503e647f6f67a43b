// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/pretrain/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "voxdesc/error.hpp"

namespace voxdesc::pretrain {
namespace {

MatX pairwise_sq_dists(const MatX& a, const MatX& b) {
  MatX d = -2.0 * (a * b.transpose());
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

Real sign_or_zero(Real x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

NceResult nce_loss(const MatX& f_p, const MatX& f_q, Real tau) {
  if (!(tau > 0.0)) throw InvalidInput("nce_loss: tau must be positive");
  if (f_p.rows() != f_q.rows() || f_p.cols() != f_q.cols())
    throw InvalidInput("nce_loss: feature shapes disagree");
  if (f_p.rows() < 2)
    throw InvalidInput("nce_loss: need at least 2 pairs for negatives");

  const MatX logits = (f_p * f_q.transpose()) / tau;
  const VecX rowmax = logits.rowwise().maxCoeff();
  MatX p = (logits.colwise() - rowmax).array().exp();
  const VecX z = p.rowwise().sum();
  p.array().colwise() /= z.array();

  NceResult out;
  out.loss =
      (z.array().log() + rowmax.array() - logits.diagonal().array()).sum();
  MatX dlogits = std::move(p);
  dlogits.diagonal().array() -= 1.0;
  out.df_p = (dlogits * f_q) / tau;
  out.df_q = (dlogits.transpose() * f_p) / tau;
  return out;
}

MatX soft_correspondence(const MatX& f_p, const MatX& f_q, Real temp) {
  if (!(temp > 0.0))
    throw InvalidInput("soft_correspondence: temp must be positive");
  if (f_p.cols() != f_q.cols())
    throw InvalidInput("soft_correspondence: feature dims disagree");
  if (f_p.rows() < 1 || f_q.rows() < 1)
    throw InvalidInput("soft_correspondence: empty feature set");

  MatX w = -pairwise_sq_dists(f_p, f_q) / temp;
  const VecX rowmax = w.rowwise().maxCoeff();
  w = (w.colwise() - rowmax).array().exp();
  const VecX z = w.rowwise().sum();
  w.array().colwise() /= z.array();
  return w;
}

void soft_correspondence_backward(const MatX& f_p, const MatX& f_q, Real temp,
                                  const MatX& weights, const MatX& upstream,
                                  MatX& df_p, MatX& df_q) {
  if (weights.rows() != f_p.rows() || weights.cols() != f_q.rows() ||
      upstream.rows() != weights.rows() || upstream.cols() != weights.cols())
    throw InvalidInput("soft_correspondence_backward: shape mismatch");

  // Softmax rows: dA = W o (U - rowsum(U o W)), A = -D / temp.
  const VecX dot = (upstream.array() * weights.array()).rowwise().sum();
  const MatX da =
      weights.array() * (upstream.colwise() - dot).array();
  const MatX dd = -da / temp;
  const VecX row = dd.rowwise().sum();
  const VecX col = dd.colwise().sum().transpose();
  // D_ij = |f_i - g_j|^2.
  df_p = 2.0 * (row.asDiagonal() * f_p - dd * f_q);
  df_q = 2.0 * (col.asDiagonal() * f_q - dd.transpose() * f_p);
}

Real median_sq_dist(const MatX& f_p, const MatX& f_q) {
  const MatX d = pairwise_sq_dists(f_p, f_q);
  std::vector<Real> flat(d.data(), d.data() + d.size());
  if (flat.empty()) throw InvalidInput("median_sq_dist: empty feature set");
  const std::size_t mid = flat.size() / 2;
  std::nth_element(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(mid),
                   flat.end());
  return flat[mid];
}

Real cycle_loss(const RigidTransform& fwd, const RigidTransform& bwd,
                CycleGrads* grads) {
  const Mat3 m = fwd.rotation * bwd.rotation - Mat3::Identity();
  const Vec3 v = fwd.rotation * bwd.translation + fwd.translation;
  const Real loss = m.cwiseAbs().sum() + v.cwiseAbs().sum();
  if (grads != nullptr) {
    const Mat3 sm = m.unaryExpr(&sign_or_zero);
    const Vec3 sv = v.unaryExpr(&sign_or_zero);
    grads->dr_fwd = sm * bwd.rotation.transpose() +
                    sv * bwd.translation.transpose();
    grads->dr_bwd = fwd.rotation.transpose() * sm;
    grads->dt_fwd = sv;
    grads->dt_bwd = fwd.rotation.transpose() * sv;
  }
  return loss;
}

CycleChain cycle_alignment(const Points& p, const Points& q, const MatX& f_p,
                           const MatX& f_q, Real temp) {
  if (p.rows() != f_p.rows() || q.rows() != f_q.rows())
    throw InvalidInput("cycle_alignment: points and features disagree");

  Real t_eff = temp;
  if (!(t_eff > 0.0))
    t_eff = std::max(median_sq_dist(f_p, f_q), Real(1e-12));

  const MatX w_pq = soft_correspondence(f_p, f_q, t_eff);
  const MatX w_qp = soft_correspondence(f_q, f_p, t_eff);
  const Points qhat = w_pq * q;
  const Points phat = w_qp * p;
  const VecX ones_p = VecX::Ones(p.rows());
  const VecX ones_q = VecX::Ones(q.rows());

  CycleChain out;
  out.temperature = t_eff;
  out.fwd = weighted_rigid_fit(p, qhat, ones_p);
  out.bwd = weighted_rigid_fit(q, phat, ones_q);
  CycleGrads tg;
  out.loss = cycle_loss(out.fwd, out.bwd, &tg);

  // The raw points enter the fits as constants; only the soft targets carry
  // gradient back to the features.
  const RigidFitGrads fg =
      weighted_rigid_fit_backward(p, qhat, ones_p, tg.dr_fwd, tg.dt_fwd);
  const RigidFitGrads bg =
      weighted_rigid_fit_backward(q, phat, ones_q, tg.dr_bwd, tg.dt_bwd);
  const MatX dw_pq = fg.dy * q.transpose();
  const MatX dw_qp = bg.dy * p.transpose();

  MatX da_p, da_q, db_p, db_q;
  soft_correspondence_backward(f_p, f_q, t_eff, w_pq, dw_pq, da_p, da_q);
  soft_correspondence_backward(f_q, f_p, t_eff, w_qp, dw_qp, db_q, db_p);
  out.df_p = da_p + db_p;
  out.df_q = da_q + db_q;
  return out;
}

}  // namespace voxdesc::pretrain
