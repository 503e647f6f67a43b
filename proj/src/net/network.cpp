// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/net/network.hpp"

#include <cmath>
#include <utility>

#include "voxdesc/error.hpp"
#include "voxdesc/rng.hpp"

namespace voxdesc::net {

namespace {

Eigen::Map<MatX> as_matrix(ParamBlock& block, Index rows, Index cols) {
  return Eigen::Map<MatX>(block.value.data(), rows, cols);
}

Eigen::Map<const MatX> as_matrix(const ParamBlock& block, Index rows,
                                 Index cols) {
  return Eigen::Map<const MatX>(block.value.data(), rows, cols);
}

std::string layer_name(const char* kind, int layer, const char* leaf) {
  return std::string(kind) + std::to_string(layer + 1) + "." + leaf;
}

}  // namespace

void Network::validate_config() const {
  if (config_.channels.empty())
    throw InvalidInput("Network: channel plan is empty");
  if (config_.channels.size() != config_.strides.size())
    throw InvalidInput("Network: channels and strides differ in length");
  if (config_.resolution < 4 || config_.resolution > 64)
    throw InvalidInput("Network: resolution out of range");
  for (const int c : config_.channels)
    if (c < 1 || c > 512) throw InvalidInput("Network: bad channel count");
  for (const int s : config_.strides)
    if (s != 1 && s != 2) throw InvalidInput("Network: strides must be 1 or 2");
  if (config_.feature_dim < 1 || config_.feature_dim > 1024)
    throw InvalidInput("Network: bad feature dimension");
  if (!(config_.head_gain > 0.0) || !(config_.norm_eps > 0.0))
    throw InvalidInput("Network: head_gain and norm_eps must be positive");
}

void Network::build_tables() {
  int dim = config_.resolution;
  int in_ch = 1;
  dims_.clear();
  gather_.clear();
  for (std::size_t l = 0; l < config_.channels.size(); ++l) {
    const int stride = config_.strides[l];
    const int out_dim = (dim - 1) / stride + 1;  // pad 1, kernel 3
    if (out_dim < 2)
      throw InvalidInput("Network: spatial extent collapses below 2 voxels");
    LayerDims d;
    d.in_ch = in_ch;
    d.out_ch = config_.channels[l];
    d.stride = stride;
    d.in_dim = dim;
    d.out_dim = out_dim;
    d.in_vox = static_cast<Index>(dim) * dim * dim;
    d.out_vox = static_cast<Index>(out_dim) * out_dim * out_dim;
    dims_.push_back(d);

    Eigen::MatrixXi table(27, d.out_vox);
    for (int ox = 0; ox < out_dim; ++ox)
      for (int oy = 0; oy < out_dim; ++oy)
        for (int oz = 0; oz < out_dim; ++oz) {
          const Index o =
              (static_cast<Index>(ox) * out_dim + oy) * out_dim + oz;
          for (int dx = 0; dx < 3; ++dx)
            for (int dy = 0; dy < 3; ++dy)
              for (int dz = 0; dz < 3; ++dz) {
                const int ix = ox * stride + dx - 1;
                const int iy = oy * stride + dy - 1;
                const int iz = oz * stride + dz - 1;
                const int dd = (dx * 3 + dy) * 3 + dz;
                const bool inside = ix >= 0 && iy >= 0 && iz >= 0 &&
                                    ix < dim && iy < dim && iz < dim;
                table(dd, o) =
                    inside
                        ? static_cast<int>(
                              (static_cast<Index>(ix) * dim + iy) * dim + iz)
                        : -1;
              }
        }
    gather_.push_back(std::move(table));
    dim = out_dim;
    in_ch = config_.channels[l];
  }
  col_ws_.assign(dims_.size(), {});
  dcol_ws_.assign(dims_.size(), {});
}

Eigen::Map<MatX> Network::map_scratch(std::vector<Real>& ws, Index rows,
                                      Index cols) const {
  const std::size_t need = static_cast<std::size_t>(rows * cols);
  if (ws.size() < need) ws.resize(need);
  return Eigen::Map<MatX>(ws.data(), rows, cols);
}

Network::Network(NetConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  validate_config();
  build_tables();
  Rng rng(seed);
  for (int l = 0; l < n_layers(); ++l) {
    const auto& d = dims_[static_cast<std::size_t>(l)];
    const Index k = static_cast<Index>(d.in_ch) * 27;
    const Real bound = std::sqrt(6.0 / static_cast<Real>(k));
    VecX w(d.out_ch * k);
    for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-bound, bound);
    params_.blocks.push_back({layer_name("conv", l, "weight"), std::move(w)});
    params_.blocks.push_back(
        {layer_name("conv", l, "bias"), VecX::Zero(d.out_ch)});
    params_.blocks.push_back(
        {layer_name("norm", l, "gamma"), VecX::Ones(d.out_ch)});
    params_.blocks.push_back(
        {layer_name("norm", l, "beta"), VecX::Zero(d.out_ch)});
  }
  const int c_last = config_.channels.back();
  const Real bound =
      config_.head_gain * std::sqrt(6.0 / static_cast<Real>(c_last));
  VecX w(static_cast<Index>(config_.feature_dim) * c_last);
  for (Index i = 0; i < w.size(); ++i) w(i) = rng.uniform(-bound, bound);
  params_.blocks.push_back({"head.weight", std::move(w)});
  params_.blocks.push_back({"head.bias", VecX::Zero(config_.feature_dim)});
}

Network::Network(NetConfig config, ParamSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  validate_config();
  build_tables();
  // Shape check against a freshly initialized twin.
  const Network reference(config_, 0);
  if (reference.params_.blocks.size() != params_.blocks.size())
    throw InvalidInput("Network: parameter set has wrong block count");
  for (std::size_t i = 0; i < params_.blocks.size(); ++i) {
    const auto& got = params_.blocks[i];
    const auto& want = reference.params_.blocks[i];
    if (got.name != want.name || got.value.size() != want.value.size())
      throw InvalidInput("Network: parameter block " + got.name +
                         " does not match the architecture");
  }
}

Eigen::Map<MatX> Network::im2col(const MatX& act, int layer,
                                 Index batch) const {
  const auto& d = dims_[static_cast<std::size_t>(layer)];
  const auto& table = gather_[static_cast<std::size_t>(layer)];
  const Index k = static_cast<Index>(d.in_ch) * 27;
  Eigen::Map<MatX> col = map_scratch(col_ws_[static_cast<std::size_t>(layer)],
                                     k, d.out_vox * batch);
  col.setZero();
  const Real* src = act.data();  // d.in_ch x (in_vox * batch), column-major
  Real* dst_base = col.data();
  for (Index g = 0; g < batch; ++g) {
    const Index in_base = g * d.in_vox;
    const Index out_base = g * d.out_vox;
    for (Index o = 0; o < d.out_vox; ++o) {
      Real* dst = dst_base + (out_base + o) * k;
      const int* tab = table.data() + o * 27;
      for (int dd = 0; dd < 27; ++dd) {
        const int vin = tab[dd];
        if (vin < 0) continue;
        const Real* column = src + (in_base + vin) * d.in_ch;
        for (int c = 0; c < d.in_ch; ++c)
          dst[static_cast<Index>(c) * 27 + dd] = column[c];
      }
    }
  }
  return col;
}

MatX Network::forward(const MatX& grids, Tape* tape) const {
  const Index v0 = dims_.front().in_vox;
  if (grids.rows() != v0)
    throw InvalidInput("Network::forward: grid size does not match the "
                       "configured resolution");
  const Index batch = grids.cols();
  if (batch == 0) throw InvalidInput("Network::forward: empty batch");
  if (!grids.allFinite())
    throw InvalidInput("Network::forward: non-finite grid values");

  const int layers = n_layers();
  if (tape != nullptr) {
    tape->consumed = false;
    tape->batch = batch;
    tape->conv_out.assign(static_cast<std::size_t>(layers), MatX());
    tape->mean.assign(static_cast<std::size_t>(layers), MatX());
    tape->invstd.assign(static_cast<std::size_t>(layers), MatX());
    tape->act.assign(static_cast<std::size_t>(layers), MatX());
  }

  MatX act = Eigen::Map<const MatX>(grids.data(), 1, v0 * batch);
  if (tape != nullptr) tape->input = act;

  for (int l = 0; l < layers; ++l) {
    const auto& d = dims_[static_cast<std::size_t>(l)];
    const Index k = static_cast<Index>(d.in_ch) * 27;
    const auto col = im2col(act, l, batch);
    const auto w =
        as_matrix(params_.at(layer_name("conv", l, "weight")), d.out_ch, k);
    const VecX& bias = params_.at(layer_name("conv", l, "bias")).value;
    MatX out = w * col;
    out.colwise() += bias;
    if (tape != nullptr) tape->conv_out[static_cast<std::size_t>(l)] = out;

    // Instance norm: statistics per grid and channel.
    MatX mu(d.out_ch, batch), inv(d.out_ch, batch);
    for (Index g = 0; g < batch; ++g) {
      auto block = out.middleCols(g * d.out_vox, d.out_vox);
      mu.col(g) = block.rowwise().mean();
      block.colwise() -= mu.col(g);
      const VecX var =
          block.rowwise().squaredNorm() / static_cast<Real>(d.out_vox);
      inv.col(g) = (var.array() + config_.norm_eps).rsqrt();
      block.array().colwise() *= inv.col(g).array();
    }
    const VecX& gamma = params_.at(layer_name("norm", l, "gamma")).value;
    const VecX& beta = params_.at(layer_name("norm", l, "beta")).value;
    out.array().colwise() *= gamma.array();
    out.colwise() += beta;
    out = out.cwiseMax(0.0);
    if (tape != nullptr) {
      tape->mean[static_cast<std::size_t>(l)] = std::move(mu);
      tape->invstd[static_cast<std::size_t>(l)] = std::move(inv);
      tape->act[static_cast<std::size_t>(l)] = out;
    }
    act = std::move(out);
  }

  const auto& last = dims_.back();
  MatX pooled(last.out_ch, batch);
  for (Index g = 0; g < batch; ++g)
    pooled.col(g) =
        act.middleCols(g * last.out_vox, last.out_vox).rowwise().mean();
  if (tape != nullptr) tape->pooled = pooled;

  const auto head = as_matrix(params_.at("head.weight"), config_.feature_dim,
                              last.out_ch);
  MatX features = head * pooled;
  features.colwise() += params_.at("head.bias").value;
  return features;
}

ParamSet Network::backward(Tape& tape, const MatX& upstream,
                           MatX* grid_grads) const {
  return backward_impl(tape, upstream, grid_grads, true);
}

MatX Network::input_gradients(Tape& tape, const MatX& upstream) const {
  MatX grid_grads;
  backward_impl(tape, upstream, &grid_grads, false);
  return grid_grads;
}

ParamSet Network::backward_impl(Tape& tape, const MatX& upstream,
                                MatX* grid_grads, bool want_params) const {
  if (tape.consumed)
    throw InvalidInput("Network::backward: tape already consumed");
  if (tape.batch == 0 || tape.act.size() != static_cast<std::size_t>(n_layers()))
    throw InvalidInput("Network::backward: tape was not filled by forward");
  if (upstream.rows() != config_.feature_dim || upstream.cols() != tape.batch)
    throw InvalidInput("Network::backward: upstream shape mismatch");
  tape.consumed = true;

  const Index batch = tape.batch;
  ParamSet grads;
  if (want_params) grads = params_.zeros_like();
  const auto& last = dims_.back();

  if (want_params) {
    as_matrix(grads.at("head.weight"), config_.feature_dim, last.out_ch) =
        upstream * tape.pooled.transpose();
    grads.at("head.bias").value = upstream.rowwise().sum();
  }

  const auto head = as_matrix(params_.at("head.weight"), config_.feature_dim,
                              last.out_ch);
  const MatX dpooled = head.transpose() * upstream;

  MatX dact(last.out_ch, last.out_vox * batch);
  for (Index g = 0; g < batch; ++g)
    dact.middleCols(g * last.out_vox, last.out_vox).colwise() =
        VecX(dpooled.col(g) / static_cast<Real>(last.out_vox));

  for (int l = n_layers() - 1; l >= 0; --l) {
    const auto& d = dims_[static_cast<std::size_t>(l)];
    const std::size_t ul = static_cast<std::size_t>(l);

    // ReLU.
    dact = (tape.act[ul].array() > 0.0).select(dact, 0.0);

    // Instance norm, per grid.
    const VecX& gamma = params_.at(layer_name("norm", l, "gamma")).value;
    VecX dgamma = VecX::Zero(d.out_ch);
    VecX dbeta = VecX::Zero(d.out_ch);
    MatX dconv(d.out_ch, d.out_vox * batch);
    for (Index g = 0; g < batch; ++g) {
      const auto dy = dact.middleCols(g * d.out_vox, d.out_vox);
      const auto x = tape.conv_out[ul].middleCols(g * d.out_vox, d.out_vox);
      const VecX mu = tape.mean[ul].col(g);
      const VecX inv = tape.invstd[ul].col(g);
      MatX xhat = x.colwise() - mu;
      xhat.array().colwise() *= inv.array();
      if (want_params) {
        dbeta += dy.rowwise().sum();
        dgamma += (dy.cwiseProduct(xhat)).rowwise().sum();
      }
      MatX dxhat = dy;
      dxhat.array().colwise() *= gamma.array();
      const VecX m1 = dxhat.rowwise().mean();
      const VecX m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
      MatX dx = dxhat.colwise() - m1;
      dx.array() -= xhat.array().colwise() * m2.array();
      dx.array().colwise() *= inv.array();
      dconv.middleCols(g * d.out_vox, d.out_vox) = dx;
    }
    // Convolution.
    const Index k = static_cast<Index>(d.in_ch) * 27;
    if (want_params) {
      grads.at(layer_name("norm", l, "gamma")).value = dgamma;
      grads.at(layer_name("norm", l, "beta")).value = dbeta;
      const MatX& in_act = l == 0 ? tape.input : tape.act[ul - 1];
      const auto col = im2col(in_act, l, batch);
      as_matrix(grads.at(layer_name("conv", l, "weight")), d.out_ch, k) =
          dconv * col.transpose();
      grads.at(layer_name("conv", l, "bias")).value = dconv.rowwise().sum();
    }

    const auto w =
        as_matrix(params_.at(layer_name("conv", l, "weight")), d.out_ch, k);
    auto dcol = map_scratch(dcol_ws_[ul], k, d.out_vox * batch);
    dcol.noalias() = w.transpose() * dconv;

    // col2im scatter-add.
    MatX dprev = MatX::Zero(d.in_ch, d.in_vox * batch);
    const auto& table = gather_[ul];
    const Real* src = dcol.data();
    Real* dst = dprev.data();
    for (Index g = 0; g < batch; ++g) {
      const Index in_base = g * d.in_vox;
      const Index out_base = g * d.out_vox;
      for (Index o = 0; o < d.out_vox; ++o) {
        const Real* column = src + (out_base + o) * k;
        const int* tab = table.data() + o * 27;
        for (int dd = 0; dd < 27; ++dd) {
          const int vin = tab[dd];
          if (vin < 0) continue;
          Real* target = dst + (in_base + vin) * d.in_ch;
          for (int c = 0; c < d.in_ch; ++c)
            target[c] += column[static_cast<Index>(c) * 27 + dd];
        }
      }
    }
    dact = std::move(dprev);
  }

  if (grid_grads != nullptr)
    *grid_grads =
        Eigen::Map<const MatX>(dact.data(), dims_.front().in_vox, batch);
  return grads;
}

}  // namespace voxdesc::net
