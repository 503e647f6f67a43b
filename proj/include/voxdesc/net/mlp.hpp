// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/net/params.hpp"

namespace voxdesc::net {

struct MlpConfig {
  std::vector<int> widths;  // input, hidden..., output
};

struct MlpTape {
  bool consumed = false;
  MatX input;
  std::vector<MatX> act;  // post-ReLU hidden activations
};

/// Dense ReLU network with a linear last layer (regression head style).
class Mlp {
 public:
  Mlp(MlpConfig config, std::uint64_t seed);
  Mlp(MlpConfig config, ParamSet params);

  const MlpConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// x: widths.front() x B. Returns widths.back() x B.
  MatX forward(const MatX& x, MlpTape* tape = nullptr) const;

  /// Consumes the tape; optionally reports dL/dx.
  ParamSet backward(MlpTape& tape, const MatX& upstream,
                    MatX* input_grads = nullptr) const;

 private:
  void validate_config() const;
  int n_layers() const { return static_cast<int>(config_.widths.size()) - 1; }
  MlpConfig config_;
  ParamSet params_;
};

}  // namespace voxdesc::net
