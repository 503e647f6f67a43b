// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/rfopt/rfopt.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "voxdesc/error.hpp"
#include "voxdesc/rfopt/mmd.hpp"
#include "voxdesc/rng.hpp"

namespace voxdesc::rfopt {

namespace {

MatX stack_rows(const std::vector<MatX>& parts, Index cols) {
  Index total = 0;
  for (const MatX& p : parts) total += p.rows();
  MatX out(total, cols);
  Index at = 0;
  for (const MatX& p : parts) {
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

// Features of the fixed per-cloud evaluation anchors at one scale.
MatX eval_features(const net::Network& net,
                   const std::vector<geom::PointCloud>& clouds,
                   const std::vector<std::vector<Index>>& anchors, Real scale,
                   const extract::ExtractorConfig& extractor) {
  std::vector<MatX> parts;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    if (anchors[i].empty()) continue;
    const extract::PatchSet ps =
        extract::build_patches(clouds[i], anchors[i], scale, extractor);
    if (ps.anchors.empty()) continue;
    parts.push_back(extract::features_from_patches(net, ps));
  }
  if (parts.empty())
    throw NumericError(
        "optimize_receptive_field: no usable evaluation patches");
  return stack_rows(parts, net.config().feature_dim);
}

}  // namespace

FeatureBank build_feature_bank(const net::Network& net,
                               const std::vector<geom::PointCloud>& sources,
                               Index n_s,
                               const extract::ExtractorConfig& extractor,
                               std::uint64_t seed,
                               std::string checkpoint_id) {
  if (sources.empty())
    throw InvalidInput("build_feature_bank: no source clouds");
  if (n_s < 2) throw InvalidInput("build_feature_bank: n_s must be >= 2");

  Rng rng(seed);
  const Index ncl = static_cast<Index>(sources.size());
  std::vector<MatX> parts;
  for (Index i = 0; i < ncl; ++i) {
    const geom::PointCloud& cloud = sources[static_cast<std::size_t>(i)];
    Index want = n_s / ncl + (i < n_s % ncl ? 1 : 0);
    want = std::min(want, cloud.size());
    if (want < 1) continue;
    const auto anchors =
        rng.child(static_cast<std::uint64_t>(i) + 1)
            .sample_without_replacement(cloud.size(), want);
    const extract::PatchSet ps =
        extract::build_patches(cloud, anchors, extractor.base_scale, extractor);
    if (ps.anchors.empty()) continue;
    parts.push_back(extract::features_from_patches(net, ps));
  }
  if (parts.empty())
    throw NumericError("build_feature_bank: no usable source patches");
  FeatureBank bank;
  bank.features = stack_rows(parts, net.config().feature_dim);
  if (bank.features.rows() < 2)
    throw NumericError("build_feature_bank: fewer than two usable patches");
  bank.checkpoint_id = std::move(checkpoint_id);
  bank.seed = seed;
  return bank;
}

RfOptResult optimize_receptive_field(
    const net::Network& net, const FeatureBank& bank,
    const std::vector<geom::PointCloud>& targets,
    const extract::ExtractorConfig& extractor, const RfOptConfig& config) {
  if (targets.empty())
    throw InvalidInput("optimize_receptive_field: no target clouds");
  if (bank.features.rows() < 2)
    throw InvalidInput("optimize_receptive_field: bank needs >= 2 rows");
  if (bank.features.cols() != net.config().feature_dim)
    throw InvalidInput(
        "optimize_receptive_field: bank width does not match the network");
  if (config.n_t < 2 || config.max_iters < 0 || config.patience < 1 ||
      config.full_eval_every < 1 || config.source_batch < 2 ||
      config.eval_anchors < 2)
    throw InvalidInput("optimize_receptive_field: bad iteration counts");
  if (!(config.lr > 0.0) || !(config.tol > 0.0))
    throw InvalidInput("optimize_receptive_field: lr and tol must be positive");
  if (!(config.min_scale > 0.0) || !(config.max_scale > config.min_scale))
    throw InvalidInput("optimize_receptive_field: bad clamp bounds");
  if (extractor.base_scale < config.min_scale ||
      extractor.base_scale > config.max_scale)
    throw InvalidInput(
        "optimize_receptive_field: initial scale outside the clamp bounds");

  const Real bandwidth = config.bandwidth > 0.0
                             ? config.bandwidth
                             : median_bandwidth(bank.features);

  Rng rng(config.seed);
  Rng pick = rng.child(1);   // per-iteration cloud and anchor draws
  Rng sub = rng.child(2);    // bank row subsets
  Rng fixed = rng.child(3);  // evaluation anchors

  // One fixed evaluation sample, spread over the clouds; the start/end
  // numbers and the trace's full-bank rows all reuse it so they compare
  // scales, not samples.
  const Index ncl = static_cast<Index>(targets.size());
  std::vector<std::vector<Index>> eval_anchors(targets.size());
  const Index per = (config.eval_anchors + ncl - 1) / ncl;
  for (Index i = 0; i < ncl; ++i) {
    const Index want = std::min(per, targets[static_cast<std::size_t>(i)].size());
    if (want < 1) continue;
    eval_anchors[static_cast<std::size_t>(i)] =
        fixed.child(static_cast<std::uint64_t>(i) + 1)
            .sample_without_replacement(
                targets[static_cast<std::size_t>(i)].size(), want);
  }
  const auto full_mmd = [&](Real at) {
    const MatX f = eval_features(net, targets, eval_anchors, at, extractor);
    return mmd(bank.features, f, bandwidth).value;
  };

  RfOptResult out;
  Real s = extractor.base_scale;
  out.initial_mmd = full_mmd(s);
  out.trace.push_back({0, s, out.initial_mmd, true});

  Real log_s = std::log(s);
  const Real lo = std::log(config.min_scale);
  const Real hi = std::log(config.max_scale);
  Real m1 = 0.0, m2 = 0.0;  // Adam moments on the single scalar
  int updates = 0, calm = 0, unusable = 0;
  Index degenerate_seen = 0, anchors_seen = 0;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    Rng it = pick.child(static_cast<std::uint64_t>(iter));
    const geom::PointCloud& cloud =
        targets[static_cast<std::size_t>(it.uniform_int(ncl))];
    const Index want = std::min<Index>(config.n_t, cloud.size());
    const auto anchors = it.sample_without_replacement(cloud.size(), want);
    const extract::PatchSet ps =
        extract::build_patches(cloud, anchors, s, extractor);
    anchors_seen += static_cast<Index>(anchors.size());
    degenerate_seen += static_cast<Index>(ps.degenerate.size());
    if (anchors_seen >= 64 && 2 * degenerate_seen > anchors_seen)
      throw NumericError(
          "optimize_receptive_field: " + std::to_string(degenerate_seen) +
          " of " + std::to_string(anchors_seen) +
          " target frames were degenerate; the target geometry does not "
          "support oriented patches");
    if (static_cast<Index>(ps.anchors.size()) < 2) {
      if (++unusable >= 25)
        throw NumericError(
            "optimize_receptive_field: 25 consecutive iterations without "
            "enough usable target patches");
      continue;
    }
    unusable = 0;

    net::Tape tape;
    const MatX feats = extract::features_from_patches(net, ps, &tape);
    const Index take = std::min(config.source_batch, bank.features.rows());
    const auto picked = sub.child(static_cast<std::uint64_t>(iter))
                            .sample_without_replacement(bank.features.rows(),
                                                        take);
    MatX src(take, bank.features.cols());
    for (Index r = 0; r < take; ++r)
      src.row(r) = bank.features.row(picked[static_cast<std::size_t>(r)]);

    const MmdResult loss = mmd(src, feats, bandwidth);
    const MatX grid_grads = net.input_gradients(tape, loss.dtargets.transpose());
    const Real ds = extract::patches_scale_grad(ps, extractor, grid_grads);
    const Real g = ds * s;  // chain through s = exp(log s)
    if (!std::isfinite(loss.value) || !std::isfinite(g))
      throw NumericError(
          "optimize_receptive_field: non-finite value at iteration " +
          std::to_string(iter));

    ++updates;
    m1 = 0.9 * m1 + 0.1 * g;
    m2 = 0.999 * m2 + 0.001 * g * g;
    const Real t = static_cast<Real>(updates);
    const Real mhat = m1 / (1.0 - std::pow(0.9, t));
    const Real vhat = m2 / (1.0 - std::pow(0.999, t));
    log_s -= config.lr * mhat / (std::sqrt(vhat) + 1e-8);
    log_s = std::clamp(log_s, lo, hi);
    const Real s_new = std::exp(log_s);

    out.trace.push_back({iter, s_new, loss.value, false});
    if (iter % config.full_eval_every == 0)
      out.trace.push_back({iter, s_new, full_mmd(s_new), true});

    calm = std::abs(s_new - s) / s < config.tol ? calm + 1 : 0;
    s = s_new;
    if (calm >= config.patience) break;
  }

  out.scale = s;
  out.final_mmd = full_mmd(s);
  return out;
}

}  // namespace voxdesc::rfopt
