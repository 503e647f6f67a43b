// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "voxdesc/core.hpp"

namespace voxdesc::net {

/// One named, flattened parameter tensor. Matrix-shaped blocks use Eigen's
/// column-major layout under an Eigen::Map.
struct ParamBlock {
  std::string name;
  VecX value;
};

struct ParamSet {
  std::vector<ParamBlock> blocks;

  Index total_size() const;
  ParamBlock& at(const std::string& name);
  const ParamBlock& at(const std::string& name) const;
  bool has(const std::string& name) const;

  /// Same block names and sizes, all zeros.
  ParamSet zeros_like() const;
};

struct AdamConfig {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

struct AdamState {
  std::vector<VecX> m;
  std::vector<VecX> v;
  long step = 0;
};

/// One Adam update in place. The state is lazily initialized on first use
/// and must not be shared between parameter sets of different shapes.
/// Throws NumericError naming the offending block if a gradient is not
/// finite.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace voxdesc::net
