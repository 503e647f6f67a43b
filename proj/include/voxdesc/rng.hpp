// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/error.hpp"

namespace voxdesc {

/// Deterministic random stream (xoshiro256** seeded via splitmix64).
///
/// All sampling is implemented here rather than with <random> distributions so
/// that results are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  Real uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
  std::int64_t uniform_int(std::int64_t n) {
    if (n <= 0) throw InvalidInput("Rng::uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return static_cast<std::int64_t>(v % un);
  }

  /// Standard normal (Box-Muller; one spare cached).
  Real normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    Real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Real u2 = uniform();
    const Real r = std::sqrt(-2.0 * std::log(u1));
    const Real a = 2.0 * std::numbers::pi_v<Real> * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec3 normal3() {
    Vec3 v;
    v.x() = normal();
    v.y() = normal();
    v.z() = normal();
    return v;
  }

  /// Rotation matrix drawn uniformly from SO(3) (random unit quaternion).
  Mat3 random_rotation() {
    Real q[4];
    Real norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (auto& c : q) {
        c = normal();
        norm2 += c * c;
      }
    } while (norm2 < 1e-12);
    const Real inv = 1.0 / std::sqrt(norm2);
    const Real w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
  }

  template <typename Container>
  void shuffle(Container& items) {
    const std::int64_t n = static_cast<std::int64_t>(items.size());
    for (std::int64_t i = n - 1; i > 0; --i) {
      const std::int64_t j = uniform_int(i + 1);
      std::swap(items[static_cast<std::size_t>(i)],
                items[static_cast<std::size_t>(j)]);
    }
  }

  /// k distinct indices from [0, n), in random order.
  std::vector<Index> sample_without_replacement(Index n, Index k) {
    if (k > n) throw InvalidInput("Rng::sample_without_replacement: k > n");
    std::vector<Index> pool(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < k; ++i) {
      const std::int64_t j = i + uniform_int(n - i);
      std::swap(pool[static_cast<std::size_t>(i)],
                pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

  /// Independent substream identified by a tag. Forking with distinct tags
  /// yields decorrelated streams regardless of draw order on the parent.
  Rng child(std::uint64_t tag) const {
    std::uint64_t x = state_[0] ^ rotl(state_[2], 13) ^ (tag * 0x9e3779b97f4a7c15ULL);
    return Rng(splitmix64(x));
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4];
  Real spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace voxdesc
