// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "voxdesc/net/checkpoint.hpp"
#include "voxdesc/net/mlp.hpp"
#include "voxdesc/net/network.hpp"
#include "voxdesc/rng.hpp"

using namespace voxdesc;
using net::NetConfig;
using net::Network;

namespace {

NetConfig small_config() {
  NetConfig config;
  config.resolution = 8;
  config.channels = {3, 4};
  config.strides = {2, 1};
  config.feature_dim = 5;
  config.head_gain = 1.0;
  return config;
}

MatX random_grids(const NetConfig& config, Index batch, std::uint64_t seed) {
  Rng rng(seed);
  const Index v = static_cast<Index>(config.resolution) * config.resolution *
                  config.resolution;
  MatX grids(v, batch);
  for (Index c = 0; c < batch; ++c)
    for (Index r = 0; r < v; ++r) grids(r, c) = rng.uniform();
  return grids;
}

// Scalar probe loss: fixed random projection of the feature matrix.
Real probe_loss(const MatX& features, const MatX& probe) {
  return (features.array() * probe.array()).sum();
}

}  // namespace

TEST_CASE("network forward shape and zero propagation") {
  const NetConfig config = small_config();
  const Network network(config, 7);
  const Index v = 8 * 8 * 8;
  const MatX zeros = MatX::Zero(v, 3);
  const MatX features = network.forward(zeros);
  CHECK(features.rows() == config.feature_dim);
  CHECK(features.cols() == 3);
  // Zero biases and shifts at init: a zero grid maps to the zero feature.
  CHECK(features.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("network is deterministic per seed and differs across seeds") {
  const NetConfig config = small_config();
  const Network a(config, 11), b(config, 11), c(config, 12);
  const MatX grids = random_grids(config, 2, 3);
  CHECK((a.forward(grids) - b.forward(grids)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.forward(grids) - c.forward(grids)).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("batch forward equals per-grid forward") {
  const NetConfig config = small_config();
  const Network network(config, 19);
  const MatX grids = random_grids(config, 4, 5);
  const MatX batched = network.forward(grids);
  for (Index g = 0; g < 4; ++g) {
    const MatX single = network.forward(grids.col(g));
    CHECK((batched.col(g) - single.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("instance norm cancels per-grid input scaling at init") {
  // Conv biases start at zero, so scaling a grid scales every conv output
  // linearly and the per-grid normalization removes it.
  const NetConfig config = small_config();
  const Network network(config, 23);
  const MatX grids = random_grids(config, 2, 9);
  const MatX scaled = 10.0 * grids;
  const MatX fa = network.forward(grids);
  const MatX fb = network.forward(scaled);
  // Exact up to the variance epsilon's influence on the normalizer.
  CHECK((fa - fb).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("tape reuse is rejected") {
  const NetConfig config = small_config();
  const Network network(config, 3);
  const MatX grids = random_grids(config, 2, 1);
  net::Tape tape;
  const MatX features = network.forward(grids, &tape);
  const MatX upstream = MatX::Ones(config.feature_dim, 2);
  (void)network.backward(tape, upstream);
  CHECK_THROWS_AS(network.backward(tape, upstream), InvalidInput);
}

TEST_CASE("network parameter gradients match finite differences") {
  const NetConfig config = small_config();
  Network network(config, 31);
  const MatX grids = random_grids(config, 2, 33);
  Rng rng(35);
  MatX probe(config.feature_dim, 2);
  for (Index i = 0; i < probe.size(); ++i)
    probe(static_cast<Index>(i % probe.rows()), i / probe.rows()) =
        rng.normal();

  net::Tape tape;
  (void)network.forward(grids, &tape);
  const net::ParamSet grads = network.backward(tape, probe);

  const Real h = 1e-5;
  for (std::size_t b = 0; b < network.params().blocks.size(); ++b) {
    auto& block = network.params().blocks[b];
    const VecX& g = grads.blocks[b].value;
    const Index samples = std::min<Index>(block.value.size(), 12);
    for (Index s = 0; s < samples; ++s) {
      const Index i = (s * 7919) % block.value.size();
      const Real saved = block.value(i);
      block.value(i) = saved + h;
      const Real plus = probe_loss(network.forward(grids), probe);
      block.value(i) = saved - h;
      const Real minus = probe_loss(network.forward(grids), probe);
      block.value(i) = saved;
      const Real fd = (plus - minus) / (2 * h);
      const Real scale = std::max({std::abs(fd), std::abs(g(i)), 1e-6});
      CHECK(std::abs(fd - g(i)) / scale < 1e-4);
    }
  }
}

TEST_CASE("network grid gradients match finite differences") {
  const NetConfig config = small_config();
  const Network network(config, 41);
  MatX grids = random_grids(config, 2, 43);
  Rng rng(45);
  MatX probe(config.feature_dim, 2);
  for (Index c = 0; c < 2; ++c)
    for (Index r = 0; r < config.feature_dim; ++r) probe(r, c) = rng.normal();

  net::Tape tape;
  (void)network.forward(grids, &tape);
  MatX grid_grads;
  (void)network.backward(tape, probe, &grid_grads);
  REQUIRE(grid_grads.rows() == grids.rows());
  REQUIRE(grid_grads.cols() == grids.cols());

  const Real h = 1e-5;
  for (int s = 0; s < 20; ++s) {
    const Index r = rng.uniform_int(grids.rows());
    const Index c = rng.uniform_int(grids.cols());
    const Real saved = grids(r, c);
    grids(r, c) = saved + h;
    const Real plus = probe_loss(network.forward(grids), probe);
    grids(r, c) = saved - h;
    const Real minus = probe_loss(network.forward(grids), probe);
    grids(r, c) = saved;
    const Real fd = (plus - minus) / (2 * h);
    const Real scale =
        std::max({std::abs(fd), std::abs(grid_grads(r, c)), 1e-6});
    CHECK(std::abs(fd - grid_grads(r, c)) / scale < 1e-4);
  }
}

TEST_CASE("adam descends a quadratic and rejects non-finite gradients") {
  net::ParamSet params;
  params.blocks.push_back({"x", VecX::Constant(4, 5.0)});
  net::AdamState state;
  net::AdamConfig config;
  config.lr = 0.05;
  Real prev = params.blocks[0].value.squaredNorm();
  for (int step = 0; step < 200; ++step) {
    net::ParamSet grads;
    grads.blocks.push_back({"x", 2.0 * params.blocks[0].value});
    net::adam_step(params, grads, state, config);
  }
  CHECK(params.blocks[0].value.squaredNorm() < 0.01 * prev);

  net::ParamSet bad;
  bad.blocks.push_back(
      {"x", VecX::Constant(4, std::numeric_limits<Real>::quiet_NaN())});
  try {
    net::adam_step(params, bad, state, config);
    CHECK(false);
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
}

TEST_CASE("mlp gradients match finite differences") {
  net::MlpConfig config;
  config.widths = {6, 10, 4};
  net::Mlp mlp(config, 51);
  Rng rng(53);
  MatX x(6, 3);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal();
  MatX probe(4, 3);
  for (Index i = 0; i < probe.rows(); ++i)
    for (Index j = 0; j < probe.cols(); ++j) probe(i, j) = rng.normal();

  net::MlpTape tape;
  (void)mlp.forward(x, &tape);
  MatX dx;
  const net::ParamSet grads = mlp.backward(tape, probe, &dx);

  const Real h = 1e-6;
  for (std::size_t b = 0; b < mlp.params().blocks.size(); ++b) {
    auto& block = mlp.params().blocks[b];
    for (Index i = 0; i < std::min<Index>(block.value.size(), 10); ++i) {
      const Real saved = block.value(i);
      block.value(i) = saved + h;
      const Real plus = probe_loss(mlp.forward(x), probe);
      block.value(i) = saved - h;
      const Real minus = probe_loss(mlp.forward(x), probe);
      block.value(i) = saved;
      const Real fd = (plus - minus) / (2 * h);
      const Real g = grads.blocks[b].value(i);
      CHECK(std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}) <
            1e-4);
    }
  }
  for (Index i = 0; i < x.rows(); ++i) {
    const Real saved = x(i, 0);
    x(i, 0) = saved + h;
    const Real plus = probe_loss(mlp.forward(x), probe);
    x(i, 0) = saved - h;
    const Real minus = probe_loss(mlp.forward(x), probe);
    x(i, 0) = saved;
    const Real fd = (plus - minus) / (2 * h);
    CHECK(std::abs(fd - dx(i, 0)) /
              std::max({std::abs(fd), std::abs(dx(i, 0)), 1e-6}) <
          1e-4);
  }
}

TEST_CASE("checkpoint round trip is byte-exact and rejects corruption") {
  const NetConfig config = small_config();
  const Network network(config, 61);
  net::Checkpoint checkpoint;
  checkpoint.arch = config;
  checkpoint.params = network.params();
  checkpoint.meta = {{"note", "test"}, {"s0", 0.05}};

  const auto dir = std::filesystem::temp_directory_path() / "voxdesc_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path_a = (dir / "a.json").string();
  const std::string path_b = (dir / "b.json").string();
  net::save_checkpoint(checkpoint, path_a);
  const net::Checkpoint loaded = net::load_checkpoint(path_a);
  CHECK(loaded.arch == config);
  CHECK(loaded.meta.at("note") == "test");
  net::save_checkpoint(loaded, path_b);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
  };
  CHECK(slurp((dir / "a.bin").string()) == slurp((dir / "b.bin").string()));
  // Manifests differ only in the blob file name; normalize it.
  std::string ma = slurp(path_a), mb = slurp(path_b);
  const auto fix = [](std::string s) {
    const auto pos = s.find(".bin");
    if (pos != std::string::npos && pos > 0) s[pos - 1] = '_';
    return s;
  };
  CHECK(fix(ma) == fix(mb));

  // The loaded network behaves like the saved one up to float32 rounding.
  const Network reloaded(loaded.arch, loaded.params);
  const MatX grids = random_grids(config, 2, 63);
  CHECK((network.forward(grids) - reloaded.forward(grids))
            .cwiseAbs()
            .maxCoeff() < 1e-5);

  // Truncated blob -> error that names the byte counts.
  std::filesystem::resize_file(dir / "a.bin",
                               std::filesystem::file_size(dir / "a.bin") - 4);
  try {
    (void)net::load_checkpoint(path_a);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}
