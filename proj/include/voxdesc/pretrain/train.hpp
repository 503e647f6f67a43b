// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voxdesc/data/synthetic.hpp"
#include "voxdesc/extract/extractor.hpp"
#include "voxdesc/net/network.hpp"
#include "voxdesc/net/params.hpp"

namespace voxdesc::pretrain {

struct PretrainConfig {
  std::string loss = "nce";  // "nce" or "cycle"
  Real tau = 0.07;
  int anchors_per_step = 300;  // correspondences (nce) or anchors per side
  int steps = 2000;
  Real lr = 1e-3;
  Real clip_norm = 1.0;  // cap on the global gradient norm; <= 0 disables
  // Soft-correspondence temperature for the cycle loss. Fixed, so the net
  // can sharpen its soft maps by spreading features apart; re-estimating the
  // median per step cancels that and stalls training. The default matches
  // the initial feature spread of the default net. <= 0: per-step median.
  Real soft_temp = 1e-3;
  std::uint64_t seed = 0;
  net::NetConfig net;
  extract::ExtractorConfig extractor;
};

struct CurvePoint {
  int step = 0;
  Real loss = 0.0;     // per-anchor mean for nce, composition loss for cycle
  Real seconds = 0.0;  // wall time since the run started
};

struct PretrainResult {
  net::NetConfig net;
  net::ParamSet params;
  Real scale = 0.0;  // the fixed pre-training receptive field
  std::vector<CurvePoint> curve;
};

/// Adam on the network parameters at a fixed receptive field, visiting the
/// pair list round-robin with one optimizer step per visit. The nce loss
/// draws ground-truth correspondences from each pair; the cycle loss draws
/// unlabeled anchors from both fragments. A non-finite loss aborts with the
/// offending step in the message.
PretrainResult pretrain_run(const std::vector<data::FragmentPair>& pairs,
                            const PretrainConfig& config);

}  // namespace voxdesc::pretrain
