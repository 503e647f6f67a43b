// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/pretrain/rigid.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "voxdesc/error.hpp"

namespace voxdesc::pretrain {
namespace {

struct FitParts {
  Vec3 xbar, ybar;
  MatX xc, yc;  // centered inputs, n x 3
  Mat3 h;       // sum_i w_i xc_i yc_i^T
  Real wsum = 0.0;
};

FitParts fit_parts(const Points& x, const Points& y, const VecX& w) {
  if (x.rows() != y.rows() || x.rows() != w.size())
    throw InvalidInput("weighted_rigid_fit: row counts disagree");
  if (x.rows() < 3)
    throw InvalidInput("weighted_rigid_fit: need at least 3 points");
  FitParts p;
  p.wsum = w.sum();
  if (!(p.wsum > 0.0))
    throw InvalidInput("weighted_rigid_fit: weights must sum to > 0");
  p.xbar = x.transpose() * w / p.wsum;
  p.ybar = y.transpose() * w / p.wsum;
  p.xc = x.rowwise() - p.xbar.transpose();
  p.yc = y.rowwise() - p.ybar.transpose();
  p.h = p.xc.transpose() * w.asDiagonal() * p.yc;
  return p;
}

struct SvdRot {
  Mat3 u, v;
  Vec3 sigma;  // descending
  Mat3 d;      // reflection correction diag(1, 1, +-1)
  Mat3 r;
};

SvdRot rotation_from(const Mat3& h) {
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdRot s;
  s.u = svd.matrixU();
  s.v = svd.matrixV();
  s.sigma = svd.singularValues();
  if (!(s.sigma(1) > 1e-9 * std::max(s.sigma(0), Real(1e-300))))
    throw InvalidInput(
        "weighted_rigid_fit: rank-deficient cross-covariance "
        "(collinear effective points)");
  s.d = Mat3::Identity();
  if ((s.v * s.u.transpose()).determinant() < 0.0) s.d(2, 2) = -1.0;
  s.r = s.v * s.d * s.u.transpose();
  return s;
}

// dL/dH by central differences of the closed-form rotation; used when the
// singular spectrum is too degenerate for the analytic differential.
Mat3 grad_h_fd(const Mat3& h, const Mat3& gr) {
  const Real step = 1e-6 * std::max(h.norm(), Real(1.0));
  Mat3 gh;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      Mat3 hp = h, hm = h;
      hp(a, b) += step;
      hm(a, b) -= step;
      const Mat3 dr = rotation_from(hp).r - rotation_from(hm).r;
      gh(a, b) = (gr.array() * dr.array()).sum() / (2.0 * step);
    }
  }
  return gh;
}

// dL/dH from dL/dR through R = V D U^T. For each basis direction E of H,
// A = U^T E V yields the antisymmetric dU, dV generators from 2x2 systems
// with determinant sigma_j^2 - sigma_i^2.
Mat3 grad_h(const SvdRot& s, const Mat3& h, const Mat3& gr) {
  const Real scale2 = std::max(s.sigma(0) * s.sigma(0), Real(1e-300));
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(s.sigma(i) * s.sigma(i) - s.sigma(j) * s.sigma(j)) <=
          1e-9 * scale2)
        return grad_h_fd(h, gr);

  Mat3 gh;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const Mat3 am = s.u.row(a).transpose() * s.v.row(b);  // U^T E_ab V
      Mat3 omega_u = Mat3::Zero(), omega_v = Mat3::Zero();
      for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
          const Real det = s.sigma(j) * s.sigma(j) - s.sigma(i) * s.sigma(i);
          const Real ou = (s.sigma(j) * am(i, j) + s.sigma(i) * am(j, i)) / det;
          const Real ov = (s.sigma(i) * am(i, j) + s.sigma(j) * am(j, i)) / det;
          omega_u(i, j) = ou;
          omega_u(j, i) = -ou;
          omega_v(i, j) = ov;
          omega_v(j, i) = -ov;
        }
      }
      const Mat3 dr = s.v * (omega_v * s.d - s.d * omega_u) * s.u.transpose();
      gh(a, b) = (gr.array() * dr.array()).sum();
    }
  }
  return gh;
}

}  // namespace

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform inv;
  inv.rotation = t.rotation.transpose();
  inv.translation = -(t.rotation.transpose() * t.translation);
  return inv;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform c;
  c.rotation = a.rotation * b.rotation;
  c.translation = a.rotation * b.translation + a.translation;
  return c;
}

Points apply(const RigidTransform& t, const Points& x) {
  Points y = x * t.rotation.transpose();
  y.rowwise() += t.translation.transpose();
  return y;
}

RigidTransform weighted_rigid_fit(const Points& x, const Points& y,
                                  const VecX& weights) {
  const FitParts p = fit_parts(x, y, weights);
  RigidTransform t;
  t.rotation = rotation_from(p.h).r;
  t.translation = p.ybar - t.rotation * p.xbar;
  return t;
}

RigidFitGrads weighted_rigid_fit_backward(const Points& x, const Points& y,
                                          const VecX& weights,
                                          const Mat3& upstream_r,
                                          const Vec3& upstream_t) {
  const FitParts p = fit_parts(x, y, weights);
  const SvdRot s = rotation_from(p.h);

  // t = ybar - R xbar feeds the translation gradient into R and the means.
  const Vec3 dybar_t = upstream_t;
  const Vec3 dxbar_t = -(s.r.transpose() * upstream_t);
  const Mat3 gr = upstream_r - upstream_t * p.xbar.transpose();

  const Mat3 gh = grad_h(s, p.h, gr);

  // H = sum_i w_i xc_i yc_i^T.
  MatX dxc = (p.yc * gh.transpose()).array().colwise() * weights.array();
  MatX dyc = (p.xc * gh).array().colwise() * weights.array();
  const VecX dw_h = ((p.xc * gh).array() * p.yc.array()).rowwise().sum();

  // Centering: xc_i = x_i - xbar, with xbar = sum w x / sum w.
  const Vec3 dxbar = dxbar_t - dxc.colwise().sum().transpose();
  const Vec3 dybar = dybar_t - dyc.colwise().sum().transpose();

  RigidFitGrads g;
  g.dx = dxc + (weights / p.wsum) * dxbar.transpose();
  g.dy = dyc + (weights / p.wsum) * dybar.transpose();
  g.dweights = dw_h + (p.xc * dxbar + p.yc * dybar) / p.wsum;
  return g;
}

}  // namespace voxdesc::pretrain
