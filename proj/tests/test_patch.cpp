// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "voxdesc/data/synthetic.hpp"
#include "voxdesc/geom/knn.hpp"
#include "voxdesc/patch/lrf.hpp"
#include "voxdesc/patch/voxelize.hpp"
#include "voxdesc/rng.hpp"

using namespace voxdesc;

namespace {

geom::PointCloud test_cloud(std::uint64_t seed) {
  data::RigidPairConfig config;
  config.scene_points = 1600;
  config.full_overlap = true;
  return data::gen_rigid_fragment_pair(config, seed).first;
}

// Anchors whose neighborhoods have a clear covariance structure; the frame
// is only well defined away from rotationally symmetric patches.
bool generic_anchor(const geom::PointCloud& cloud, Index center, Real radius) {
  const Vec3 c = cloud.points.row(center);
  Mat3 cov = Mat3::Zero();
  Vec3 mean_dir = Vec3::Zero();
  int count = 0;
  for (Index i = 0; i < cloud.size(); ++i) {
    const Vec3 d = Vec3(cloud.points.row(i)) - c;
    if (d.squaredNorm() > radius * radius) continue;
    cov += d * d.transpose();
    mean_dir += d;
    ++count;
  }
  if (count < 12) return false;
  cov /= count;
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();
  const Real gap_xy = (ev(2) - ev(1)) / ev(2);
  const Real gap_z = (ev(1) - ev(0)) / ev(2);
  return gap_xy > 0.2 && gap_z > 0.2;
}

}  // namespace

TEST_CASE("lrf axes are orthonormal and right-handed") {
  const auto cloud = test_cloud(100);
  patch::LrfConfig config;
  config.radius = 0.1;
  Rng rng(5);
  int tested = 0;
  for (int trial = 0; trial < 60 && tested < 25; ++trial) {
    const Index center = rng.uniform_int(cloud.size());
    patch::Lrf lrf;
    try {
      lrf = patch::estimate_lrf(cloud, center, config);
    } catch (const InvalidInput&) {
      continue;
    }
    ++tested;
    CHECK((lrf.axes * lrf.axes.transpose() - Mat3::Identity()).norm() < 1e-10);
    CHECK(lrf.axes.determinant() == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(tested >= 20);
}

TEST_CASE("lrf and voxel grid are invariant to rigid motions") {
  const auto cloud = test_cloud(200);
  patch::LrfConfig lrf_config;
  lrf_config.radius = 0.1;
  const Real scale = 0.05;
  const Real margin = 1.5;
  patch::VoxelizeConfig vox;

  Rng rng(7);
  const Mat3 rot = rng.random_rotation();
  const Vec3 shift(0.4, -0.2, 0.9);
  geom::PointCloud moved;
  moved.points = (rot * cloud.points.transpose()).transpose();
  moved.points.rowwise() += shift.transpose();

  int tested = 0;
  for (int trial = 0; trial < 200 && tested < 12; ++trial) {
    const Index center = rng.uniform_int(cloud.size());
    if (!generic_anchor(cloud, center, lrf_config.radius)) continue;
    patch::Lrf a, b;
    try {
      a = patch::estimate_lrf(cloud, center, lrf_config);
      b = patch::estimate_lrf(moved, center, lrf_config);
    } catch (const InvalidInput&) {
      continue;
    }
    ++tested;
    CHECK((b.axes - rot * a.axes).norm() < 1e-6);
    const Points pa = patch::extract_patch(cloud, center, a, scale, margin);
    const Points pb = patch::extract_patch(moved, center, b, scale, margin);
    REQUIRE(pa.rows() == pb.rows());
    const VecX ga = patch::voxelize(pa, scale, vox);
    const VecX gb = patch::voxelize(pb, scale, vox);
    CHECK((ga - gb).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK(tested >= 8);
}

TEST_CASE("lrf requires enough neighbors") {
  geom::PointCloud tiny;
  tiny.points.resize(3, 3);
  tiny.points << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  patch::LrfConfig config;
  config.radius = 5.0;
  config.min_neighbors = 8;
  CHECK_THROWS_AS(patch::estimate_lrf(tiny, 0, config), InvalidInput);
}

TEST_CASE("extract_patch clips to the scaled cube and keeps the anchor") {
  const auto cloud = test_cloud(300);
  patch::LrfConfig config;
  config.radius = 0.1;
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Index center = rng.uniform_int(cloud.size());
    patch::Lrf lrf;
    try {
      lrf = patch::estimate_lrf(cloud, center, config);
    } catch (const InvalidInput&) {
      continue;
    }
    const Real scale = 0.06, margin = 1.5;
    const Points local = patch::extract_patch(cloud, center, lrf, scale, margin);
    REQUIRE(local.rows() >= 1);
    CHECK(local.cwiseAbs().maxCoeff() <= margin * scale + 1e-12);
    Real closest = 1e9;
    for (Index i = 0; i < local.rows(); ++i)
      closest = std::min(closest, local.row(i).norm());
    CHECK(closest < 1e-12);  // the anchor itself
  }
}

TEST_CASE("voxelize: empty patch gives a zero grid") {
  const Points empty(0, 3);
  const VecX grid = patch::voxelize(empty, 0.05, {});
  CHECK(grid.size() == 16 * 16 * 16);
  CHECK(grid.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("voxelize: single point at the center makes a symmetric blob") {
  Points one(1, 3);
  one.setZero();
  patch::VoxelizeConfig config;
  const VecX grid = patch::voxelize(one, 0.05, config);
  CHECK(grid.minCoeff() >= 0.0);
  CHECK(grid.maxCoeff() <= 1.0);
  const Real peak = grid.maxCoeff();
  CHECK(peak > 0.01);
  // The eight voxels around the cube center share the peak value.
  for (int ix = 7; ix <= 8; ++ix)
    for (int iy = 7; iy <= 8; ++iy)
      for (int iz = 7; iz <= 8; ++iz)
        CHECK(grid(patch::grid_index(config, ix, iy, iz)) ==
              doctest::Approx(peak).epsilon(1e-12));
  // Far corner stays empty.
  CHECK(grid(patch::grid_index(config, 0, 0, 0)) == 0.0);
}

TEST_CASE("voxelize stays within [0, 1] and saturates gracefully") {
  Rng rng(13);
  Points dense(500, 3);
  for (Index i = 0; i < dense.rows(); ++i)
    for (int d = 0; d < 3; ++d) dense(i, d) = 0.002 * rng.normal();
  const VecX grid = patch::voxelize(dense, 0.05, {});
  CHECK(grid.minCoeff() >= 0.0);
  CHECK(grid.maxCoeff() <= 1.0);
  CHECK(grid.maxCoeff() > 0.5);  // heavy overlap pushes the union up
}

TEST_CASE("voxelize_backward matches finite differences") {
  Rng rng(17);
  patch::VoxelizeConfig config;
  for (int trial = 0; trial < 8; ++trial) {
    const Index n = 20 + rng.uniform_int(60);
    const Real scale = 0.03 + 0.05 * rng.uniform();
    Points local(n, 3);
    for (Index i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d)
        local(i, d) = rng.uniform(-1.4 * scale, 1.4 * scale);
    VecX upstream(patch::grid_size(config));
    for (Index i = 0; i < upstream.size(); ++i) upstream(i) = rng.normal();

    const Real analytic =
        patch::voxelize_backward(local, scale, config, upstream);
    const Real h = 1e-6 * scale;
    const Real plus = upstream.dot(patch::voxelize(local, scale + h, config));
    const Real minus = upstream.dot(patch::voxelize(local, scale - h, config));
    const Real fd = (plus - minus) / (2 * h);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("voxelize_backward survives a point on a voxel center") {
  patch::VoxelizeConfig config;
  const Real scale = 0.05;
  Points local(2, 3);
  // First point exactly on the voxel center (8.5/16 in cube coords).
  const Real cube = (8.5 / 16.0 - 0.5) * 2.0 * scale;
  local << cube, cube, cube, 0.01, -0.004, 0.002;
  const VecX grid = patch::voxelize(local, scale, config);
  CHECK(grid.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  VecX upstream = VecX::Ones(patch::grid_size(config));
  const Real analytic =
      patch::voxelize_backward(local, scale, config, upstream);
  CHECK(std::isfinite(analytic));
  const Real h = 1e-6 * scale;
  const Real fd = (upstream.dot(patch::voxelize(local, scale + h, config)) -
                   upstream.dot(patch::voxelize(local, scale - h, config))) /
                  (2 * h);
  CHECK(analytic == doctest::Approx(fd).epsilon(1e-4));
}
