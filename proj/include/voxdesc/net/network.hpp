// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/net/params.hpp"

namespace voxdesc::net {

struct NetConfig {
  int resolution = 16;
  // Six 3x3x3 convolutions; stride-2 layers downsample 16 -> 8 -> 4 -> 2.
  std::vector<int> channels = {4, 8, 8, 16, 16, 32};
  std::vector<int> strides = {2, 2, 1, 2, 1, 1};
  int feature_dim = 32;
  // Scale on the output layer's init so that fresh features start small
  // relative to the contrastive temperature.
  Real head_gain = 0.1;
  Real norm_eps = 1e-6;

  bool operator==(const NetConfig&) const = default;
};

/// Forward activations needed by backward. One tape per forward call;
/// backward consumes it.
struct Tape {
  bool consumed = false;
  Index batch = 0;
  MatX input;                   // 1 x (V0 * B)
  std::vector<MatX> conv_out;   // per layer, pre-normalization
  std::vector<MatX> mean;       // per layer, channels x B
  std::vector<MatX> invstd;     // per layer, channels x B
  std::vector<MatX> act;        // per layer, post-ReLU
  MatX pooled;                  // channels_last x B
};

/// 3-D CNN descriptor network: conv(3^3) + instance norm + ReLU blocks,
/// global average pooling, then a dense head. All convolutions run as
/// batched im2col matrix products, so whole minibatches of grids go through
/// a handful of GEMMs. The im2col buffers are grow-only scratch reused
/// across calls, so one instance must not run forward/backward from two
/// threads at once.
class Network {
 public:
  Network(NetConfig config, std::uint64_t seed);
  Network(NetConfig config, ParamSet params);

  const NetConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// grids: one flattened res^3 grid per column. Returns feature_dim x B.
  /// Pass a tape to enable a later backward call.
  MatX forward(const MatX& grids, Tape* tape = nullptr) const;

  /// Gradients of a scalar loss with upstream = dL/dfeatures
  /// (feature_dim x B). Marks the tape consumed. If grid_grads is given it
  /// receives dL/dgrids with the same shape as the forward input.
  ParamSet backward(Tape& tape, const MatX& upstream,
                    MatX* grid_grads = nullptr) const;

  /// Like backward but only propagates to the input grids, skipping all
  /// parameter gradients. Cheaper when the weights are frozen.
  MatX input_gradients(Tape& tape, const MatX& upstream) const;

  int n_layers() const { return static_cast<int>(config_.channels.size()); }

 private:
  struct LayerDims {
    int in_ch, out_ch, stride, in_dim, out_dim;
    Index in_vox, out_vox;
  };
  void validate_config() const;
  void build_tables();
  ParamSet backward_impl(Tape& tape, const MatX& upstream, MatX* grid_grads,
                         bool want_params) const;
  Eigen::Map<MatX> im2col(const MatX& act, int layer, Index batch) const;
  Eigen::Map<MatX> map_scratch(std::vector<Real>& ws, Index rows,
                               Index cols) const;

  NetConfig config_;
  ParamSet params_;
  std::vector<LayerDims> dims_;
  // Per layer: 27 x out_vox matrix of input voxel indices, -1 for padding.
  std::vector<Eigen::MatrixXi> gather_;
  // Per-layer column buffers for im2col and its gradient; sized for the
  // largest batch seen so far.
  mutable std::vector<std::vector<Real>> col_ws_, dcol_ws_;
};

}  // namespace voxdesc::net
