// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/patch/voxelize.hpp"

#include <algorithm>
#include <cmath>

#include "voxdesc/error.hpp"

namespace voxdesc::patch {

namespace {

// Contributions below exp(-kCut) are dropped; the window radius in cube
// units follows from it.
constexpr Real kCut = 32.0;

// Window extent can never exceed the resolution, which is capped at 64.
constexpr int kMaxWindow = 64;

struct Window {
  int lo[3];
  int n[3];                    // per-axis count
  Real factor[3][kMaxWindow];  // per-axis Gaussian factors exp(-e^2 / sigma)
  Real offset[3][kMaxWindow];  // e = u_a - g_a per axis
};

void check_inputs(const Points& local_points, Real scale,
                  const VoxelizeConfig& config) {
  if (!(scale > 0.0)) throw InvalidInput("voxelize: scale must be positive");
  if (config.resolution < 2 || config.resolution > 64)
    throw InvalidInput("voxelize: resolution out of range");
  if (!(config.sigma > 0.0))
    throw InvalidInput("voxelize: sigma must be positive");
  if (local_points.rows() > 0 && !local_points.allFinite())
    throw InvalidInput("voxelize: non-finite patch coordinates");
}

// Per-axis voxel ranges and Gaussian factors for one point in cube coords.
bool make_window(const Vec3& u, const VoxelizeConfig& config, Real reach,
                 Window& win) {
  const int res = config.resolution;
  for (int a = 0; a < 3; ++a) {
    const Real center_lo = (u[a] - reach) * res - 0.5;
    const Real center_hi = (u[a] + reach) * res - 0.5;
    int lo = static_cast<int>(std::ceil(center_lo));
    int hi = static_cast<int>(std::floor(center_hi));
    lo = std::max(lo, 0);
    hi = std::min(hi, res - 1);
    if (lo > hi) return false;
    win.lo[a] = lo;
    win.n[a] = std::min(hi - lo + 1, kMaxWindow);
    for (int i = 0; i < win.n[a]; ++i) {
      const Real g = (static_cast<Real>(lo + i) + 0.5) / res;
      const Real e = u[a] - g;
      win.offset[a][i] = e;
      win.factor[a][i] = std::exp(-e * e / config.sigma);
    }
  }
  return true;
}

}  // namespace

VecX voxelize(const Points& local_points, Real scale,
              const VoxelizeConfig& config) {
  check_inputs(local_points, scale, config);
  const Real reach = std::sqrt(config.sigma * kCut);

  VecX survive = VecX::Ones(grid_size(config));  // prod(1 - w) per voxel
  Window win;
  for (Index p = 0; p < local_points.rows(); ++p) {
    const Vec3 u = Vec3(local_points.row(p)) / (2.0 * scale) +
                   Vec3::Constant(0.5);
    if (!make_window(u, config, reach, win)) continue;
    for (int i = 0; i < win.n[0]; ++i) {
      const Real fx = win.factor[0][i];
      for (int j = 0; j < win.n[1]; ++j) {
        const Real fxy = fx * win.factor[1][j];
        Real* cell = survive.data() +
                     grid_index(config, win.lo[0] + i, win.lo[1] + j,
                                win.lo[2]);
        for (int k = 0; k < win.n[2]; ++k)
          cell[k] *= 1.0 - fxy * win.factor[2][k];
      }
    }
  }
  return VecX::Ones(grid_size(config)) - survive;
}

Real voxelize_backward(const Points& local_points, Real scale,
                       const VoxelizeConfig& config, const VecX& upstream) {
  check_inputs(local_points, scale, config);
  if (upstream.size() != grid_size(config))
    throw InvalidInput("voxelize_backward: upstream size mismatch");
  const Real reach = std::sqrt(config.sigma * kCut);

  // Pass 1: survival products (the voxelize forward pass).
  VecX survive = VecX::Ones(grid_size(config));
  Window win;
  for (Index p = 0; p < local_points.rows(); ++p) {
    const Vec3 u = Vec3(local_points.row(p)) / (2.0 * scale) +
                   Vec3::Constant(0.5);
    if (!make_window(u, config, reach, win)) continue;
    for (int i = 0; i < win.n[0]; ++i) {
      const Real fx = win.factor[0][i];
      for (int j = 0; j < win.n[1]; ++j) {
        const Real fxy = fx * win.factor[1][j];
        Real* cell = survive.data() +
                     grid_index(config, win.lo[0] + i, win.lo[1] + j,
                                win.lo[2]);
        for (int k = 0; k < win.n[2]; ++k)
          cell[k] *= 1.0 - fxy * win.factor[2][k];
      }
    }
  }

  // Pass 2: dv/ds = survive * sum_p (dw_p/ds) / (1 - w_p), the leave-one-out
  // sum in ratio form. The clamp only engages when a point sits numerically
  // on a voxel center, where the true contribution vanishes anyway.
  //
  // With u = l / (2s) + 0.5, dw/ds = w * sum_a (u_a - g_a) * l_a / (sigma s^2).
  VecX ratio_sum = VecX::Zero(grid_size(config));
  const Real inv_sig_s2 = 1.0 / (config.sigma * scale * scale);
  for (Index p = 0; p < local_points.rows(); ++p) {
    const Vec3 l = local_points.row(p);
    const Vec3 u = l / (2.0 * scale) + Vec3::Constant(0.5);
    if (!make_window(u, config, reach, win)) continue;
    Real proj[3][kMaxWindow];
    for (int a = 0; a < 3; ++a)
      for (int i = 0; i < win.n[a]; ++i)
        proj[a][i] = win.offset[a][i] * l[a];
    for (int i = 0; i < win.n[0]; ++i) {
      const Real fx = win.factor[0][i];
      for (int j = 0; j < win.n[1]; ++j) {
        const Real fxy = fx * win.factor[1][j];
        const Real pxy = proj[0][i] + proj[1][j];
        Real* acc = ratio_sum.data() +
                    grid_index(config, win.lo[0] + i, win.lo[1] + j,
                               win.lo[2]);
        for (int k = 0; k < win.n[2]; ++k) {
          const Real w = fxy * win.factor[2][k];
          const Real dw = w * (pxy + proj[2][k]) * inv_sig_s2;
          acc[k] += dw / std::max(1.0 - w, 1e-12);
        }
      }
    }
  }
  return upstream.dot(survive.cwiseProduct(ratio_sum));
}

}  // namespace voxdesc::patch
