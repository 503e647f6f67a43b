// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "voxdesc/data/synthetic.hpp"
#include "voxdesc/error.hpp"
#include "voxdesc/pretrain/losses.hpp"
#include "voxdesc/pretrain/rigid.hpp"
#include "voxdesc/pretrain/train.hpp"
#include "voxdesc/rng.hpp"

using namespace voxdesc;
using pretrain::CycleChain;
using pretrain::CycleGrads;
using pretrain::NceResult;
using pretrain::RigidTransform;

namespace {

bool rel_close(Real a, Real b, Real tol) {
  const Real scale = std::max({std::abs(a), std::abs(b), Real(1e-8)});
  return std::abs(a - b) / scale < tol;
}

MatX random_matrix(Index rows, Index cols, Rng& rng, Real scale = 1.0) {
  MatX m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
  return m;
}

Points random_points(Index n, Rng& rng, Real scale = 1.0) {
  Points p(n, 3);
  for (Index i = 0; i < n; ++i)
    p.row(i) = scale * rng.normal3().transpose();
  return p;
}

RigidTransform random_transform(Rng& rng) {
  RigidTransform t;
  t.rotation = rng.random_rotation();
  t.translation = rng.normal3();
  return t;
}

Real fit_residual(const Points& x, const Points& y, const RigidTransform& t) {
  return (pretrain::apply(t, x) - y).rowwise().squaredNorm().sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// nce loss
// ---------------------------------------------------------------------------

TEST_CASE("nce loss matches the hand-computed two-pair case") {
  MatX f(2, 2);
  f << 1, 0, 0, 1;
  const NceResult out = pretrain::nce_loss(f, f, 1.0);
  // Each anchor: softmax over {e^1, e^0}; total 2 log(1 + e^-1).
  CHECK(out.loss == doctest::Approx(2.0 * std::log1p(std::exp(-1.0)))
                        .epsilon(1e-12));
}

TEST_CASE("nce loss on identical rows is n log n") {
  Rng rng(5);
  const Index n = 7;
  MatX f(n, 3);
  const Vec3 row = rng.normal3();
  for (Index i = 0; i < n; ++i) f.row(i) = row.transpose();
  const NceResult out = pretrain::nce_loss(f, f, 0.07);
  CHECK(out.loss == doctest::Approx(n * std::log(Real(n))).epsilon(1e-12));
  // Uniform softmax everywhere: the gradient vanishes by symmetry.
  CHECK(out.df_p.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nce loss gradients match finite differences") {
  Rng rng(17);
  const Index n = 6, d = 4;
  const MatX f_p = random_matrix(n, d, rng, 0.3);
  const MatX f_q = random_matrix(n, d, rng, 0.3);
  const Real tau = 0.07;
  const NceResult out = pretrain::nce_loss(f_p, f_q, tau);

  const Real h = 1e-6;
  for (const bool side_p : {true, false}) {
    const MatX& grad = side_p ? out.df_p : out.df_q;
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < d; ++c) {
        MatX fp = f_p, fq = f_q;
        MatX& target = side_p ? fp : fq;
        target(r, c) += h;
        const Real plus = pretrain::nce_loss(fp, fq, tau).loss;
        target(r, c) -= 2.0 * h;
        const Real minus = pretrain::nce_loss(fp, fq, tau).loss;
        CHECK(rel_close(grad(r, c), (plus - minus) / (2.0 * h), 1e-4));
      }
    }
  }
}

TEST_CASE("nce loss errors on bad input") {
  MatX one = MatX::Ones(1, 3);
  MatX two = MatX::Ones(2, 3);
  CHECK_THROWS_AS(pretrain::nce_loss(one, one, 0.07), InvalidInput);
  CHECK_THROWS_AS(pretrain::nce_loss(two, two, 0.0), InvalidInput);
  CHECK_THROWS_AS(pretrain::nce_loss(two, MatX::Ones(2, 4), 0.07),
                  InvalidInput);
}

TEST_CASE("gradient descent on a two-pair nce toy strictly descends") {
  Rng rng(23);
  MatX f_p = random_matrix(2, 2, rng, 0.5);
  MatX f_q = random_matrix(2, 2, rng, 0.5);
  Real prev = pretrain::nce_loss(f_p, f_q, 1.0).loss;
  const Real lr = 0.02;
  for (int step = 0; step < 100; ++step) {
    const NceResult out = pretrain::nce_loss(f_p, f_q, 1.0);
    f_p -= lr * out.df_p;
    f_q -= lr * out.df_q;
    const Real now = pretrain::nce_loss(f_p, f_q, 1.0).loss;
    CHECK(now < prev);
    prev = now;
  }
}

// ---------------------------------------------------------------------------
// soft correspondence
// ---------------------------------------------------------------------------

TEST_CASE("soft correspondence rows are stochastic and handle edge shapes") {
  Rng rng(31);
  const MatX f_p = random_matrix(5, 3, rng);
  const MatX f_q = random_matrix(8, 3, rng);
  const MatX w = pretrain::soft_correspondence(f_p, f_q, 0.5);
  CHECK(w.rows() == 5);
  CHECK(w.cols() == 8);
  CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-8);
  CHECK(w.minCoeff() >= 0.0);

  // Single target: every row is the full mass.
  const MatX single = pretrain::soft_correspondence(f_p, f_q.topRows(1), 0.5);
  CHECK((single.array() - 1.0).abs().maxCoeff() < 1e-12);

  // Identical targets: uniform rows.
  MatX same(4, 3);
  for (Index i = 0; i < 4; ++i) same.row(i) = f_q.row(0);
  const MatX uniform = pretrain::soft_correspondence(f_p, same, 0.5);
  CHECK((uniform.array() - 0.25).abs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(pretrain::soft_correspondence(f_p, f_q, 0.0), InvalidInput);
}

TEST_CASE("soft correspondence hardens to the nearest neighbor") {
  Rng rng(37);
  const Index m = 6, d = 4;
  // Well-separated targets, queries near distinct targets.
  MatX f_q = random_matrix(m, d, rng, 2.0);
  for (Index i = 0; i < m; ++i) f_q(i, i % d) += 4.0 * (i % 2 ? 1.0 : -1.0);
  MatX f_p = f_q + random_matrix(m, d, rng, 0.05);

  const MatX w = pretrain::soft_correspondence(f_p, f_q, 1e-3);
  for (Index i = 0; i < m; ++i) {
    Index best = 0;
    Real best_d = (f_p.row(i) - f_q.row(0)).squaredNorm();
    for (Index j = 1; j < m; ++j) {
      const Real dist = (f_p.row(i) - f_q.row(j)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = j;
      }
    }
    Index argmax = 0;
    w.row(i).maxCoeff(&argmax);
    CHECK(argmax == best);
    CHECK(w(i, best) > 0.99);
  }
}

TEST_CASE("soft correspondence gradients match finite differences") {
  Rng rng(41);
  const Index n = 4, m = 5, d = 3;
  const MatX f_p = random_matrix(n, d, rng);
  const MatX f_q = random_matrix(m, d, rng);
  const MatX upstream = random_matrix(n, m, rng);
  const Real temp = 0.37;

  const MatX w = pretrain::soft_correspondence(f_p, f_q, temp);
  MatX df_p, df_q;
  pretrain::soft_correspondence_backward(f_p, f_q, temp, w, upstream, df_p,
                                         df_q);

  const auto probe = [&](const MatX& a, const MatX& b) {
    return (pretrain::soft_correspondence(a, b, temp).array() *
            upstream.array())
        .sum();
  };
  const Real h = 1e-6;
  for (const bool side_p : {true, false}) {
    const MatX& grad = side_p ? df_p : df_q;
    const Index rows = side_p ? n : m;
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < d; ++c) {
        MatX fp = f_p, fq = f_q;
        MatX& target = side_p ? fp : fq;
        target(r, c) += h;
        const Real plus = probe(fp, fq);
        target(r, c) -= 2.0 * h;
        const Real minus = probe(fp, fq);
        CHECK(rel_close(grad(r, c), (plus - minus) / (2.0 * h), 1e-4));
      }
    }
  }
}

TEST_CASE("median squared distance sits inside the pairwise range") {
  Rng rng(43);
  const MatX f_p = random_matrix(6, 3, rng);
  const MatX f_q = random_matrix(7, 3, rng);
  const Real med = pretrain::median_sq_dist(f_p, f_q);
  Real lo = 1e300, hi = 0.0;
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 7; ++j) {
      const Real d = (f_p.row(i) - f_q.row(j)).squaredNorm();
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  CHECK(med >= lo);
  CHECK(med <= hi);

  MatX a(1, 2), b(1, 2);
  a << 0, 0;
  b << 3, 4;
  CHECK(pretrain::median_sq_dist(a, b) == doctest::Approx(25.0));
}

// ---------------------------------------------------------------------------
// rigid fit
// ---------------------------------------------------------------------------

TEST_CASE("rigid fit recovers exact motions") {
  Rng rng(47);
  const Points x = random_points(20, rng);
  const VecX ones = VecX::Ones(20);

  const RigidTransform same = pretrain::weighted_rigid_fit(x, x, ones);
  CHECK((same.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(same.translation.cwiseAbs().maxCoeff() < 1e-10);

  const RigidTransform truth = random_transform(rng);
  const Points y = pretrain::apply(truth, x);
  for (const bool weighted : {false, true}) {
    VecX w = ones;
    if (weighted)
      for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(0.2, 2.0);
    const RigidTransform fit = pretrain::weighted_rigid_fit(x, y, w);
    CHECK((fit.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((fit.translation - truth.translation).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((fit.rotation.transpose() * fit.rotation - Mat3::Identity())
              .cwiseAbs()
              .maxCoeff() < 1e-6);
    CHECK(fit.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("rigid fit beats 1000 random transforms on noisy data") {
  Rng rng(53);
  const Points x = random_points(40, rng);
  const RigidTransform truth = random_transform(rng);
  const Points y = pretrain::apply(truth, x) + random_points(40, rng, 0.05);
  const VecX ones = VecX::Ones(40);

  const RigidTransform fit = pretrain::weighted_rigid_fit(x, y, ones);
  const Real best = fit_residual(x, y, fit);
  for (int trial = 0; trial < 1000; ++trial)
    CHECK(best <= fit_residual(x, y, random_transform(rng)) + 1e-12);
}

TEST_CASE("rigid fit is equivariant to a pre-rotation of the source") {
  Rng rng(59);
  const Points x = random_points(15, rng);
  const RigidTransform truth = random_transform(rng);
  const Points y = pretrain::apply(truth, x) + random_points(15, rng, 0.02);
  const VecX ones = VecX::Ones(15);

  const Mat3 r0 = rng.random_rotation();
  const Points x_rot = x * r0.transpose();
  const RigidTransform base = pretrain::weighted_rigid_fit(x, y, ones);
  const RigidTransform rot = pretrain::weighted_rigid_fit(x_rot, y, ones);
  CHECK((rot.rotation - base.rotation * r0.transpose()).cwiseAbs().maxCoeff() <
        1e-9);
  CHECK((rot.translation - base.translation).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("rigid fit rejects degenerate input") {
  Rng rng(61);
  Points line(10, 3);
  for (Index i = 0; i < 10; ++i)
    line.row(i) = (0.3 * static_cast<Real>(i)) * Vec3(1, 2, 3).transpose();
  const Points y = random_points(10, rng);
  const VecX ones = VecX::Ones(10);
  CHECK_THROWS_AS(pretrain::weighted_rigid_fit(line, y, ones), InvalidInput);

  const Points two = random_points(2, rng);
  CHECK_THROWS_AS(
      pretrain::weighted_rigid_fit(two, two, VecX::Ones(2)), InvalidInput);
  const Points x = random_points(5, rng);
  CHECK_THROWS_AS(
      pretrain::weighted_rigid_fit(x, x, VecX::Zero(5)), InvalidInput);
  CHECK_THROWS_AS(
      pretrain::weighted_rigid_fit(x, random_points(6, rng), VecX::Ones(5)),
      InvalidInput);
}

TEST_CASE("rigid fit backward matches finite differences") {
  Rng rng(67);
  const Index n = 10;
  const Points x = random_points(n, rng);
  const RigidTransform truth = random_transform(rng);
  const Points y = pretrain::apply(truth, x) + random_points(n, rng, 0.1);
  VecX w(n);
  for (Index i = 0; i < n; ++i) w(i) = rng.uniform(0.5, 1.5);

  const Mat3 gr = random_matrix(3, 3, rng);
  const Vec3 gt = rng.normal3();
  const auto probe = [&](const Points& px, const Points& py, const VecX& pw) {
    const RigidTransform t = pretrain::weighted_rigid_fit(px, py, pw);
    return (gr.array() * t.rotation.array()).sum() + gt.dot(t.translation);
  };

  const pretrain::RigidFitGrads grads =
      pretrain::weighted_rigid_fit_backward(x, y, w, gr, gt);

  const Real h = 1e-6;
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < 3; ++c) {
      Points px = x;
      px(i, c) += h;
      const Real plus = probe(px, y, w);
      px(i, c) -= 2.0 * h;
      const Real minus = probe(px, y, w);
      CHECK(rel_close(grads.dx(i, c), (plus - minus) / (2.0 * h), 1e-4));

      Points py = y;
      py(i, c) += h;
      const Real plus_y = probe(x, py, w);
      py(i, c) -= 2.0 * h;
      const Real minus_y = probe(x, py, w);
      CHECK(rel_close(grads.dy(i, c), (plus_y - minus_y) / (2.0 * h), 1e-4));
    }
    VecX pw = w;
    pw(i) += h;
    const Real plus_w = probe(x, y, pw);
    pw(i) -= 2.0 * h;
    const Real minus_w = probe(x, y, pw);
    CHECK(rel_close(grads.dweights(i), (plus_w - minus_w) / (2.0 * h), 1e-4));
  }
}

TEST_CASE("rigid fit backward survives an exactly symmetric spectrum") {
  // Cube corners: the cross-covariance with an exact rigid target has three
  // equal singular values, forcing the finite-difference fallback.
  Points x(8, 3);
  Index r = 0;
  for (const Real sx : {-1.0, 1.0})
    for (const Real sy : {-1.0, 1.0})
      for (const Real sz : {-1.0, 1.0}) x.row(r++) = Vec3(sx, sy, sz);
  Rng rng(71);
  const RigidTransform truth = random_transform(rng);
  const Points y = pretrain::apply(truth, x);
  const VecX ones = VecX::Ones(8);

  const Mat3 gr = random_matrix(3, 3, rng);
  const Vec3 gt = rng.normal3();
  const pretrain::RigidFitGrads grads =
      pretrain::weighted_rigid_fit_backward(x, y, ones, gr, gt);
  CHECK(grads.dx.allFinite());
  CHECK(grads.dy.allFinite());
  CHECK(grads.dweights.allFinite());

  const auto probe = [&](const Points& px, const Points& py) {
    const RigidTransform t = pretrain::weighted_rigid_fit(px, py, ones);
    return (gr.array() * t.rotation.array()).sum() + gt.dot(t.translation);
  };
  const Real h = 1e-6;
  for (const Index i : {Index(0), Index(5)}) {
    for (Index c = 0; c < 3; ++c) {
      Points py = y;
      py(i, c) += h;
      const Real plus = probe(x, py);
      py(i, c) -= 2.0 * h;
      const Real minus = probe(x, py);
      CHECK(rel_close(grads.dy(i, c), (plus - minus) / (2.0 * h), 1e-3));
    }
  }
}

// ---------------------------------------------------------------------------
// cycle loss
// ---------------------------------------------------------------------------

TEST_CASE("cycle loss vanishes on exact inverses") {
  Rng rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    const RigidTransform t = random_transform(rng);
    CHECK(pretrain::cycle_loss(t, pretrain::inverse(t)) < 1e-9);
  }
}

TEST_CASE("cycle loss hand case and independent oracle") {
  RigidTransform fwd, bwd;
  fwd.translation = Vec3(1, 0, 0);
  CHECK(pretrain::cycle_loss(fwd, bwd) == doctest::Approx(1.0));

  Rng rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform a = random_transform(rng);
    const RigidTransform b = random_transform(rng);
    Real expected = 0.0;
    const Mat3 m = a.rotation * b.rotation - Mat3::Identity();
    const Vec3 v = a.rotation * b.translation + a.translation;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) expected += std::abs(m(i, j));
      expected += std::abs(v(i));
    }
    CHECK(pretrain::cycle_loss(a, b) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("cycle loss gradients match finite differences") {
  Rng rng(83);
  const RigidTransform fwd = random_transform(rng);
  const RigidTransform bwd = random_transform(rng);
  CycleGrads grads;
  pretrain::cycle_loss(fwd, bwd, &grads);

  const Real h = 1e-7;
  const auto probe = [](const RigidTransform& a, const RigidTransform& b) {
    return pretrain::cycle_loss(a, b);
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      RigidTransform a = fwd;
      a.rotation(i, j) += h;
      const Real plus = probe(a, bwd);
      a.rotation(i, j) -= 2.0 * h;
      CHECK(rel_close(grads.dr_fwd(i, j), (plus - probe(a, bwd)) / (2.0 * h),
                      1e-4));

      RigidTransform b = bwd;
      b.rotation(i, j) += h;
      const Real plus_b = probe(fwd, b);
      b.rotation(i, j) -= 2.0 * h;
      CHECK(rel_close(grads.dr_bwd(i, j),
                      (plus_b - probe(fwd, b)) / (2.0 * h), 1e-4));
    }
    RigidTransform a = fwd;
    a.translation(i) += h;
    const Real plus = probe(a, bwd);
    a.translation(i) -= 2.0 * h;
    CHECK(rel_close(grads.dt_fwd(i), (plus - probe(a, bwd)) / (2.0 * h),
                    1e-4));

    RigidTransform b = bwd;
    b.translation(i) += h;
    const Real plus_b = probe(fwd, b);
    b.translation(i) -= 2.0 * h;
    CHECK(rel_close(grads.dt_bwd(i), (plus_b - probe(fwd, b)) / (2.0 * h),
                    1e-4));
  }
}

TEST_CASE("cycle alignment is near zero for identity-matched sets") {
  Rng rng(89);
  const Points p = random_points(6, rng);
  MatX f(6, 6);
  f.setZero();
  f.diagonal().setConstant(2.0);  // sharply distinct features per point
  const CycleChain chain = pretrain::cycle_alignment(p, p, f, f, 0.01);
  CHECK(chain.loss < 1e-9);
}

TEST_CASE("cycle alignment gradients match finite differences") {
  Rng rng(97);
  const Index n = 6, m = 7, d = 4;
  const Points p = random_points(n, rng);
  const Points q = random_points(m, rng);
  const MatX f_p = random_matrix(n, d, rng);
  const MatX f_q = random_matrix(m, d, rng);
  const Real temp = 0.8;

  const CycleChain chain = pretrain::cycle_alignment(p, q, f_p, f_q, temp);
  CHECK(chain.loss > 0.0);
  CHECK(chain.temperature == temp);

  const Real h = 1e-6;
  for (const bool side_p : {true, false}) {
    const MatX& grad = side_p ? chain.df_p : chain.df_q;
    const Index rows = side_p ? n : m;
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < d; ++c) {
        MatX fp = f_p, fq = f_q;
        MatX& target = side_p ? fp : fq;
        target(r, c) += h;
        const Real plus = pretrain::cycle_alignment(p, q, fp, fq, temp).loss;
        target(r, c) -= 2.0 * h;
        const Real minus = pretrain::cycle_alignment(p, q, fp, fq, temp).loss;
        CHECK(rel_close(grad(r, c), (plus - minus) / (2.0 * h), 1e-4));
      }
    }
  }
}

TEST_CASE("cycle alignment picks a usable adaptive temperature") {
  Rng rng(101);
  const Points p = random_points(8, rng);
  const Points q = random_points(9, rng);
  const MatX f_p = random_matrix(8, 5, rng, 0.01);  // small, like fresh nets
  const MatX f_q = random_matrix(9, 5, rng, 0.01);
  const CycleChain chain = pretrain::cycle_alignment(p, q, f_p, f_q, 0.0);
  CHECK(chain.temperature > 0.0);
  CHECK(std::isfinite(chain.loss));
  CHECK(chain.df_p.allFinite());
  CHECK(chain.df_q.allFinite());
}

// ---------------------------------------------------------------------------
// trainer
// ---------------------------------------------------------------------------

namespace {

pretrain::PretrainConfig tiny_config() {
  pretrain::PretrainConfig config;
  config.net.resolution = 8;
  config.net.channels = {3, 4};
  config.net.strides = {2, 2};
  config.net.feature_dim = 6;
  config.extractor.base_scale = 0.07;
  config.extractor.min_neighbors = 6;
  config.extractor.voxel.resolution = 8;
  config.anchors_per_step = 32;
  config.steps = 40;
  config.lr = 2e-3;
  config.seed = 9;
  return config;
}

std::vector<data::FragmentPair> tiny_pairs(int count, std::uint64_t seed) {
  data::RigidPairConfig pair_config;
  pair_config.scene_points = 700;
  pair_config.min_fragment_points = 80;
  std::vector<data::FragmentPair> pairs;
  for (int i = 0; i < count; ++i)
    pairs.push_back(
        data::gen_rigid_fragment_pair(pair_config, seed + static_cast<std::uint64_t>(i)));
  return pairs;
}

}  // namespace

TEST_CASE("pretrain nce run descends and is deterministic") {
  const std::vector<data::FragmentPair> pairs = tiny_pairs(3, 300);
  const pretrain::PretrainConfig config = tiny_config();

  const pretrain::PretrainResult run = pretrain::pretrain_run(pairs, config);
  REQUIRE(run.curve.size() == 40);
  CHECK(run.scale == config.extractor.base_scale);
  Real first = 0.0, last = 0.0;
  for (int i = 0; i < 5; ++i) {
    first += run.curve[static_cast<std::size_t>(i)].loss;
    last += run.curve[run.curve.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  CHECK(last < first);
  for (const auto& point : run.curve) CHECK(std::isfinite(point.loss));

  const pretrain::PretrainResult rerun = pretrain::pretrain_run(pairs, config);
  for (std::size_t i = 0; i < run.curve.size(); ++i)
    CHECK(run.curve[i].loss == rerun.curve[i].loss);
  for (std::size_t b = 0; b < run.params.blocks.size(); ++b)
    CHECK((run.params.blocks[b].value - rerun.params.blocks[b].value)
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("pretrain with zero learning rate leaves parameters untouched") {
  const std::vector<data::FragmentPair> pairs = tiny_pairs(1, 320);
  pretrain::PretrainConfig config = tiny_config();
  config.steps = 5;
  config.lr = 0.0;

  const pretrain::PretrainResult run = pretrain::pretrain_run(pairs, config);
  const net::Network fresh(config.net, config.seed);
  for (std::size_t b = 0; b < run.params.blocks.size(); ++b)
    CHECK((run.params.blocks[b].value -
           fresh.params().blocks[b].value).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pretrain cycle run stays finite and moves the parameters") {
  const std::vector<data::FragmentPair> pairs = tiny_pairs(2, 340);
  pretrain::PretrainConfig config = tiny_config();
  config.loss = "cycle";
  config.anchors_per_step = 24;
  config.steps = 12;

  const pretrain::PretrainResult run = pretrain::pretrain_run(pairs, config);
  REQUIRE(run.curve.size() == 12);
  for (const auto& point : run.curve) {
    CHECK(std::isfinite(point.loss));
    CHECK(point.loss >= 0.0);
  }
  const net::Network fresh(config.net, config.seed);
  Real moved = 0.0;
  for (std::size_t b = 0; b < run.params.blocks.size(); ++b)
    moved += (run.params.blocks[b].value - fresh.params().blocks[b].value)
                 .cwiseAbs()
                 .sum();
  CHECK(moved > 0.0);
}

TEST_CASE("pretrain rejects bad configuration") {
  const std::vector<data::FragmentPair> pairs = tiny_pairs(1, 360);
  pretrain::PretrainConfig config = tiny_config();
  config.loss = "triplet";
  CHECK_THROWS_AS(pretrain::pretrain_run(pairs, config), InvalidInput);
  config.loss = "nce";
  config.tau = 0.0;
  CHECK_THROWS_AS(pretrain::pretrain_run(pairs, config), InvalidInput);
  config.tau = 0.07;
  CHECK_THROWS_AS(pretrain::pretrain_run({}, config), InvalidInput);
}
