// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/net/params.hpp"

#include <cmath>

#include "voxdesc/error.hpp"

namespace voxdesc::net {

Index ParamSet::total_size() const {
  Index total = 0;
  for (const auto& block : blocks) total += block.value.size();
  return total;
}

ParamBlock& ParamSet::at(const std::string& name) {
  for (auto& block : blocks)
    if (block.name == name) return block;
  throw InvalidInput("ParamSet: no block named " + name);
}

const ParamBlock& ParamSet::at(const std::string& name) const {
  for (const auto& block : blocks)
    if (block.name == name) return block;
  throw InvalidInput("ParamSet: no block named " + name);
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& block : blocks)
    if (block.name == name) return true;
  return false;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  out.blocks.reserve(blocks.size());
  for (const auto& block : blocks)
    out.blocks.push_back({block.name, VecX::Zero(block.value.size())});
  return out;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.blocks.size() != params.blocks.size())
    throw InvalidInput("adam_step: gradient/parameter block count mismatch");
  if (state.m.empty()) {
    state.m.resize(params.blocks.size());
    state.v.resize(params.blocks.size());
    for (std::size_t i = 0; i < params.blocks.size(); ++i) {
      state.m[i] = VecX::Zero(params.blocks[i].value.size());
      state.v[i] = VecX::Zero(params.blocks[i].value.size());
    }
  }
  if (state.m.size() != params.blocks.size())
    throw InvalidInput("adam_step: state does not match parameter set");

  state.step += 1;
  const Real bias1 = 1.0 - std::pow(config.beta1, static_cast<Real>(state.step));
  const Real bias2 = 1.0 - std::pow(config.beta2, static_cast<Real>(state.step));
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    auto& p = params.blocks[i];
    const auto& g = grads.blocks[i];
    if (g.name != p.name || g.value.size() != p.value.size())
      throw InvalidInput("adam_step: gradient block " + g.name +
                         " does not match parameter block " + p.name);
    if (!g.value.allFinite())
      throw NumericError("adam_step: non-finite gradient in block " + p.name);
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g.value;
    state.v[i] = config.beta2 * state.v[i] +
                 (1.0 - config.beta2) * g.value.cwiseProduct(g.value);
    p.value -= config.lr *
               (state.m[i] / bias1)
                   .cwiseQuotient(((state.v[i] / bias2).cwiseSqrt().array() +
                                   config.eps)
                                      .matrix());
  }
}

}  // namespace voxdesc::net
