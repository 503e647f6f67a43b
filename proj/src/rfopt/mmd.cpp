// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/rfopt/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "voxdesc/error.hpp"

namespace voxdesc::rfopt {

namespace {

MatX sq_dists(const MatX& a, const MatX& b) {
  MatX d = -2.0 * (a * b.transpose());
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

MmdResult mmd(const MatX& source, const MatX& target, Real bandwidth) {
  if (source.rows() < 1 || target.rows() < 1)
    throw InvalidInput("mmd: both feature sets must be non-empty");
  if (source.cols() != target.cols())
    throw InvalidInput("mmd: feature dimensions disagree");
  if (!(bandwidth > 0.0))
    throw InvalidInput("mmd: bandwidth must be positive");

  const Real h = bandwidth * bandwidth;
  const Real a = static_cast<Real>(source.rows());
  const Real b = static_cast<Real>(target.rows());
  const MatX kst = (-sq_dists(source, target) / h).array().exp();
  const MatX ktt = (-sq_dists(target, target) / h).array().exp();
  const Real kss_mean =
      ((-sq_dists(source, source) / h).array().exp()).mean();

  MmdResult out;
  out.value = kss_mean - 2.0 * kst.mean() + ktt.mean();

  // d k(x, t)/dt = k * (-2/h) (t - x); each cross pair appears once, each
  // target-target pair twice by symmetry.
  const Real c2 = 4.0 / (a * b * h);
  const Real c3 = 4.0 / (b * b * h);
  const VecX cross = kst.colwise().sum().transpose();
  const VecX self = ktt.rowwise().sum();
  out.dtargets = c2 * (cross.asDiagonal() * target - kst.transpose() * source) -
                 c3 * (self.asDiagonal() * target - ktt * target);
  return out;
}

Real median_bandwidth(const MatX& features) {
  const Index n = features.rows();
  if (n < 2) throw InvalidInput("median_bandwidth: need at least two rows");
  std::vector<Real> d2;
  d2.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      d2.push_back((features.row(i) - features.row(j)).squaredNorm());
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  if (!(*mid > 0.0))
    throw NumericError("median_bandwidth: features have no spread");
  return std::sqrt(*mid);
}

}  // namespace voxdesc::rfopt
