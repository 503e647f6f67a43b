// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/patch/lrf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "voxdesc/error.hpp"

namespace voxdesc::patch {

Lrf estimate_lrf(const geom::PointCloud& cloud, Index center,
                 const LrfConfig& config, const geom::UniformGrid* accel) {
  if (center < 0 || center >= cloud.size())
    throw InvalidInput("estimate_lrf: center index out of range");
  if (!(config.radius > 0.0))
    throw InvalidInput("estimate_lrf: radius must be positive");

  const Vec3 c = cloud.points.row(center);
  std::vector<int> neighbors;
  if (accel != nullptr) {
    neighbors = accel->radius_search(c, config.radius);
  } else {
    const Real r2 = config.radius * config.radius;
    for (Index i = 0; i < cloud.size(); ++i)
      if ((Vec3(cloud.points.row(i)) - c).squaredNorm() <= r2)
        neighbors.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(neighbors.size()) < config.min_neighbors)
    throw InvalidInput("estimate_lrf: only " +
                       std::to_string(neighbors.size()) +
                       " neighbors in the support radius, need " +
                       std::to_string(config.min_neighbors));

  Mat3 cov = Mat3::Zero();
  for (const int i : neighbors) {
    const Vec3 d = Vec3(cloud.points.row(i)) - c;
    cov += d * d.transpose();
  }
  cov /= static_cast<Real>(neighbors.size());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  if (solver.info() != Eigen::Success)
    throw NumericError("estimate_lrf: covariance eigensolve failed");
  // Eigen sorts ascending: col 0 = smallest (normal-ish), col 2 = largest.
  const Vec3 ev = solver.eigenvalues();
  const Real gap_floor = 1e-9 * std::max(ev(2), Real(1e-300));
  if (ev(1) - ev(0) <= gap_floor || ev(2) - ev(1) <= gap_floor) {
    Lrf fallback;
    fallback.origin = c;
    fallback.axes = Mat3::Identity();
    fallback.degenerate = true;
    return fallback;
  }
  Vec3 z = solver.eigenvectors().col(0);
  Vec3 x = solver.eigenvectors().col(2);

  Real sx = 0.0, sz = 0.0;
  for (const int i : neighbors) {
    const Vec3 d = Vec3(cloud.points.row(i)) - c;
    sx += d.dot(x);
    sz += d.dot(z);
  }
  if (sx < 0.0) x = -x;
  if (sz < 0.0) z = -z;

  Lrf lrf;
  lrf.origin = c;
  lrf.axes.col(0) = x;
  lrf.axes.col(1) = z.cross(x);
  lrf.axes.col(2) = z;
  return lrf;
}

Points extract_patch(const geom::PointCloud& cloud, Index center,
                     const Lrf& lrf, Real scale, Real margin,
                     const geom::UniformGrid* accel) {
  if (center < 0 || center >= cloud.size())
    throw InvalidInput("extract_patch: center index out of range");
  if (!(scale > 0.0) || !(margin > 0.0))
    throw InvalidInput("extract_patch: scale and margin must be positive");

  const Vec3 c = cloud.points.row(center);
  const Real half = margin * scale;
  std::vector<int> candidates;
  if (accel != nullptr) {
    candidates = accel->radius_search(c, half * std::sqrt(3.0));
  } else {
    candidates.resize(static_cast<std::size_t>(cloud.size()));
    for (Index i = 0; i < cloud.size(); ++i)
      candidates[static_cast<std::size_t>(i)] = static_cast<int>(i);
  }

  std::vector<Vec3> kept;
  for (const int i : candidates) {
    const Vec3 u = lrf.axes.transpose() * (Vec3(cloud.points.row(i)) - c);
    if (u.cwiseAbs().maxCoeff() <= half) kept.push_back(u);
  }
  Points local(static_cast<Index>(kept.size()), 3);
  for (std::size_t i = 0; i < kept.size(); ++i)
    local.row(static_cast<Index>(i)) = kept[i];
  return local;
}

}  // namespace voxdesc::patch
