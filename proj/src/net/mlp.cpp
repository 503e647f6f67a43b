// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/net/mlp.hpp"

#include <cmath>
#include <utility>

#include "voxdesc/error.hpp"
#include "voxdesc/rng.hpp"

namespace voxdesc::net {

namespace {

std::string fc_name(int layer, const char* leaf) {
  return "fc" + std::to_string(layer + 1) + "." + leaf;
}

}  // namespace

void Mlp::validate_config() const {
  if (config_.widths.size() < 2)
    throw InvalidInput("Mlp: need at least input and output widths");
  for (const int w : config_.widths)
    if (w < 1 || w > 8192) throw InvalidInput("Mlp: bad layer width");
}

Mlp::Mlp(MlpConfig config, std::uint64_t seed) : config_(std::move(config)) {
  validate_config();
  Rng rng(seed);
  for (int l = 0; l < n_layers(); ++l) {
    const Index in = config_.widths[static_cast<std::size_t>(l)];
    const Index out = config_.widths[static_cast<std::size_t>(l) + 1];
    const Real bound = std::sqrt(6.0 / static_cast<Real>(in));
    VecX w(out * in);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-bound, bound);
    params_.blocks.push_back({fc_name(l, "weight"), std::move(w)});
    params_.blocks.push_back({fc_name(l, "bias"), VecX::Zero(out)});
  }
}

Mlp::Mlp(MlpConfig config, ParamSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  validate_config();
  const Mlp reference(config_, 0);
  if (reference.params_.blocks.size() != params_.blocks.size())
    throw InvalidInput("Mlp: parameter set has wrong block count");
  for (std::size_t i = 0; i < params_.blocks.size(); ++i)
    if (params_.blocks[i].name != reference.params_.blocks[i].name ||
        params_.blocks[i].value.size() !=
            reference.params_.blocks[i].value.size())
      throw InvalidInput("Mlp: parameter block " + params_.blocks[i].name +
                         " does not match the architecture");
}

MatX Mlp::forward(const MatX& x, MlpTape* tape) const {
  if (x.rows() != config_.widths.front())
    throw InvalidInput("Mlp::forward: input width mismatch");
  if (x.cols() == 0) throw InvalidInput("Mlp::forward: empty batch");
  if (!x.allFinite()) throw InvalidInput("Mlp::forward: non-finite input");
  if (tape != nullptr) {
    tape->consumed = false;
    tape->input = x;
    tape->act.clear();
  }
  MatX act = x;
  for (int l = 0; l < n_layers(); ++l) {
    const Index in = config_.widths[static_cast<std::size_t>(l)];
    const Index out = config_.widths[static_cast<std::size_t>(l) + 1];
    const auto w = Eigen::Map<const MatX>(
        params_.at(fc_name(l, "weight")).value.data(), out, in);
    MatX next = w * act;
    next.colwise() += params_.at(fc_name(l, "bias")).value;
    if (l + 1 < n_layers()) {
      next = next.cwiseMax(0.0);
      if (tape != nullptr) tape->act.push_back(next);
    }
    act = std::move(next);
  }
  return act;
}

ParamSet Mlp::backward(MlpTape& tape, const MatX& upstream,
                       MatX* input_grads) const {
  if (tape.consumed) throw InvalidInput("Mlp::backward: tape already consumed");
  if (tape.input.cols() == 0 ||
      tape.act.size() != static_cast<std::size_t>(n_layers() - 1))
    throw InvalidInput("Mlp::backward: tape was not filled by forward");
  if (upstream.rows() != config_.widths.back() ||
      upstream.cols() != tape.input.cols())
    throw InvalidInput("Mlp::backward: upstream shape mismatch");
  tape.consumed = true;

  ParamSet grads = params_.zeros_like();
  MatX delta = upstream;
  for (int l = n_layers() - 1; l >= 0; --l) {
    const Index in = config_.widths[static_cast<std::size_t>(l)];
    const Index out = config_.widths[static_cast<std::size_t>(l) + 1];
    const MatX& below =
        l == 0 ? tape.input : tape.act[static_cast<std::size_t>(l) - 1];
    Eigen::Map<MatX>(grads.at(fc_name(l, "weight")).value.data(), out, in) =
        delta * below.transpose();
    grads.at(fc_name(l, "bias")).value = delta.rowwise().sum();
    const auto w = Eigen::Map<const MatX>(
        params_.at(fc_name(l, "weight")).value.data(), out, in);
    if (l == 0) {
      if (input_grads != nullptr) *input_grads = w.transpose() * delta;
      break;
    }
    delta = w.transpose() * delta;
    delta = (below.array() > 0.0).select(delta, 0.0);
  }
  return grads;
}

}  // namespace voxdesc::net
