// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/pretrain/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "voxdesc/error.hpp"
#include "voxdesc/pretrain/losses.hpp"
#include "voxdesc/rng.hpp"

namespace voxdesc::pretrain {
namespace {

struct StepBatch {
  MatX grids;        // both sides side by side, P columns first
  Index n_p = 0;     // columns belonging to P
  Points p_points;   // world positions behind the P columns
  Points q_points;
};

Points gather_rows(const Points& points, const std::vector<Index>& rows) {
  Points out(static_cast<Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = points.row(rows[i]);
  return out;
}

// Correspondence-matched batch: only pairs where both sides produced a
// patch survive, and columns stay aligned (column i of P matches column
// n_p + i of Q).
StepBatch nce_batch(const data::FragmentPair& pair, const PretrainConfig& cfg,
                    Rng& rng, int step) {
  const auto& omega = pair.correspondences;
  if (omega.size() < 2)
    throw InvalidInput("pretrain_run: pair visited at step " +
                       std::to_string(step) +
                       " has fewer than 2 correspondences");
  const Index take = std::min<Index>(cfg.anchors_per_step,
                                     static_cast<Index>(omega.size()));
  const std::vector<Index> pick =
      rng.sample_without_replacement(static_cast<Index>(omega.size()), take);

  std::vector<Index> anchors_p(pick.size()), anchors_q(pick.size());
  for (std::size_t i = 0; i < pick.size(); ++i) {
    anchors_p[i] = omega[static_cast<std::size_t>(pick[i])][0];
    anchors_q[i] = omega[static_cast<std::size_t>(pick[i])][1];
  }
  const extract::PatchSet ps_p =
      extract::build_patches(pair.first, anchors_p, cfg.extractor.base_scale,
                             cfg.extractor);
  const extract::PatchSet ps_q =
      extract::build_patches(pair.second, anchors_q, cfg.extractor.base_scale,
                             cfg.extractor);

  // Survivors keep the input order, so one pass with two cursors pairs the
  // columns back up.
  std::vector<std::pair<Index, Index>> cols;
  std::size_t ip = 0, iq = 0;
  for (std::size_t k = 0; k < pick.size(); ++k) {
    const bool has_p = ip < ps_p.anchors.size() &&
                       ps_p.anchors[ip] == anchors_p[k];
    const bool has_q = iq < ps_q.anchors.size() &&
                       ps_q.anchors[iq] == anchors_q[k];
    if (has_p && has_q)
      cols.emplace_back(static_cast<Index>(ip), static_cast<Index>(iq));
    if (has_p) ++ip;
    if (has_q) ++iq;
  }
  if (cols.size() < 2)
    throw InvalidInput("pretrain_run: fewer than 2 usable correspondences at "
                       "step " + std::to_string(step));

  StepBatch batch;
  batch.n_p = static_cast<Index>(cols.size());
  batch.grids.resize(ps_p.grids.rows(), 2 * batch.n_p);
  for (Index i = 0; i < batch.n_p; ++i) {
    batch.grids.col(i) = ps_p.grids.col(cols[static_cast<std::size_t>(i)].first);
    batch.grids.col(batch.n_p + i) =
        ps_q.grids.col(cols[static_cast<std::size_t>(i)].second);
  }
  return batch;
}

// Unlabeled batch: independent anchor draws on both fragments.
StepBatch cycle_batch(const data::FragmentPair& pair,
                      const PretrainConfig& cfg, Rng& rng, int step) {
  const Index take_p = std::min<Index>(cfg.anchors_per_step,
                                       pair.first.size());
  const Index take_q = std::min<Index>(cfg.anchors_per_step,
                                       pair.second.size());
  const std::vector<Index> anchors_p =
      rng.sample_without_replacement(pair.first.size(), take_p);
  const std::vector<Index> anchors_q =
      rng.sample_without_replacement(pair.second.size(), take_q);

  const extract::PatchSet ps_p =
      extract::build_patches(pair.first, anchors_p, cfg.extractor.base_scale,
                             cfg.extractor);
  const extract::PatchSet ps_q =
      extract::build_patches(pair.second, anchors_q, cfg.extractor.base_scale,
                             cfg.extractor);
  if (ps_p.anchors.size() < 3 || ps_q.anchors.size() < 3)
    throw InvalidInput("pretrain_run: fewer than 3 usable anchors at step " +
                       std::to_string(step));

  StepBatch batch;
  batch.n_p = static_cast<Index>(ps_p.anchors.size());
  batch.grids.resize(ps_p.grids.rows(),
                     batch.n_p + static_cast<Index>(ps_q.anchors.size()));
  batch.grids.leftCols(ps_p.grids.cols()) = ps_p.grids;
  batch.grids.rightCols(ps_q.grids.cols()) = ps_q.grids;
  batch.p_points = gather_rows(pair.first.points, ps_p.anchors);
  batch.q_points = gather_rows(pair.second.points, ps_q.anchors);
  return batch;
}

}  // namespace

PretrainResult pretrain_run(const std::vector<data::FragmentPair>& pairs,
                            const PretrainConfig& config) {
  if (pairs.empty()) throw InvalidInput("pretrain_run: no training pairs");
  const bool use_nce = config.loss == "nce";
  if (!use_nce && config.loss != "cycle")
    throw InvalidInput("pretrain_run: unknown loss '" + config.loss + "'");
  if (config.steps < 0)
    throw InvalidInput("pretrain_run: negative step count");
  if (config.anchors_per_step < 2)
    throw InvalidInput("pretrain_run: need at least 2 anchors per step");
  if (!(config.tau > 0.0))
    throw InvalidInput("pretrain_run: tau must be positive");

  net::Network network(config.net, config.seed);
  net::AdamConfig adam;
  adam.lr = config.lr;
  net::AdamState state;
  const Rng sampler = Rng(config.seed).child(1);

  PretrainResult result;
  result.net = config.net;
  result.scale = config.extractor.base_scale;
  result.curve.reserve(static_cast<std::size_t>(config.steps));

  const auto start = std::chrono::steady_clock::now();
  for (int step = 0; step < config.steps; ++step) {
    const data::FragmentPair& pair =
        pairs[static_cast<std::size_t>(step) % pairs.size()];

    // A cycle batch can hit a degenerate rigid fit (near-uniform soft maps
    // on an unlucky draw); resample the anchors a few times before giving
    // up. Each attempt gets its own stream so reruns stay deterministic.
    const int max_attempts = use_nce ? 1 : 5;
    Real logged = 0.0;
    net::Tape tape;
    MatX upstream;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
      Rng step_rng =
          sampler.child(8 * static_cast<std::uint64_t>(step) +
                        static_cast<std::uint64_t>(attempt));
      const StepBatch batch = use_nce
                                  ? nce_batch(pair, config, step_rng, step)
                                  : cycle_batch(pair, config, step_rng, step);

      const MatX feats = network.forward(batch.grids, &tape);
      const Index n_q = feats.cols() - batch.n_p;
      const MatX f_p = feats.leftCols(batch.n_p).transpose();
      const MatX f_q = feats.rightCols(n_q).transpose();

      upstream.resize(feats.rows(), feats.cols());
      if (use_nce) {
        const NceResult nce = nce_loss(f_p, f_q, config.tau);
        logged = nce.loss / static_cast<Real>(batch.n_p);
        upstream.leftCols(batch.n_p) = nce.df_p.transpose();
        upstream.rightCols(n_q) = nce.df_q.transpose();
      } else {
        CycleChain chain;
        try {
          chain = cycle_alignment(batch.p_points, batch.q_points, f_p, f_q,
                                  config.soft_temp);
        } catch (const NumericError&) {
          if (attempt + 1 == max_attempts)
            throw NumericError(
                "pretrain_run: degenerate rigid fits at step " +
                std::to_string(step) + " after " +
                std::to_string(max_attempts) + " draws");
          continue;
        }
        logged = chain.loss;
        upstream.leftCols(batch.n_p) = chain.df_p.transpose();
        upstream.rightCols(n_q) = chain.df_q.transpose();
      }
      break;
    }
    if (!std::isfinite(logged))
      throw NumericError("pretrain_run: non-finite loss at step " +
                         std::to_string(step));

    net::ParamSet grads = network.backward(tape, upstream);
    if (config.clip_norm > 0.0) {
      Real sq = 0.0;
      for (const auto& block : grads.blocks) sq += block.value.squaredNorm();
      const Real norm = std::sqrt(sq);
      if (norm > config.clip_norm)
        for (auto& block : grads.blocks)
          block.value *= config.clip_norm / norm;
    }
    net::adam_step(network.params(), grads, state, adam);

    const Real seconds =
        std::chrono::duration<Real>(std::chrono::steady_clock::now() - start)
            .count();
    result.curve.push_back({step, logged, seconds});
  }

  result.params = network.params();
  return result;
}

}  // namespace voxdesc::pretrain
