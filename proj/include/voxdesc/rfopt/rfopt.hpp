// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/extract/extractor.hpp"
#include "voxdesc/geom/mesh.hpp"
#include "voxdesc/net/network.hpp"

namespace voxdesc::rfopt {

/// Frozen source-side features the target distribution is matched against.
/// Built once per checkpoint and reused across adaptation runs.
struct FeatureBank {
  MatX features;              // n_s x feature_dim, one row per source patch
  std::string checkpoint_id;  // checksum or path of the weights behind it
  std::uint64_t seed = 0;     // sampling stream the rows came from
};

/// Samples roughly n_s anchors spread evenly over the source clouds and
/// records their features at the pre-training scale. Starved anchors are
/// skipped, so the bank can come out slightly smaller than asked.
FeatureBank build_feature_bank(const net::Network& net,
                               const std::vector<geom::PointCloud>& sources,
                               Index n_s,
                               const extract::ExtractorConfig& extractor,
                               std::uint64_t seed, std::string checkpoint_id);

struct RfOptConfig {
  int n_t = 32;          // fresh target anchors per iteration
  Real bandwidth = 0.0;  // kernel width; <= 0 uses the bank's median
  Real lr = 1e-3;        // Adam step on log s
  int max_iters = 2000;
  Real tol = 1e-4;          // relative scale step below this is "converged"
  int patience = 25;        // consecutive converged iterations that stop
  Real min_scale = 0.005;   // clamp bounds on s
  Real max_scale = 2.0;
  Index source_batch = 512;  // bank rows per iteration
  int full_eval_every = 50;  // full-bank trace cadence
  Index eval_anchors = 128;  // fixed target sample for the start/end numbers
  std::uint64_t seed = 0;
};

struct RfOptTracePoint {
  int iter = 0;
  Real scale = 0.0;
  Real mmd = 0.0;
  bool full_bank = false;  // true for the periodic full-bank evaluations
};

struct RfOptResult {
  Real scale = 0.0;  // adapted receptive field
  std::vector<RfOptTracePoint> trace;
  // Full-bank discrepancy against one fixed target sample, before and after.
  Real initial_mmd = 0.0;
  Real final_mmd = 0.0;
};

/// Adapts the receptive field to the target clouds with the network weights
/// frozen. Each iteration draws n_t anchors from one target cloud, rebuilds
/// their patches at the current s, and steps log s along the discrepancy
/// gradient that flows back through the CNN and the rasterizer. Starts from
/// extractor.base_scale; stops early once the relative step stays under
/// config.tol for config.patience iterations. Aborts when more than half of
/// all target frames so far came out degenerate.
RfOptResult optimize_receptive_field(
    const net::Network& net, const FeatureBank& bank,
    const std::vector<geom::PointCloud>& targets,
    const extract::ExtractorConfig& extractor, const RfOptConfig& config);

}  // namespace voxdesc::rfopt
