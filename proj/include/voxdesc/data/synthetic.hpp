// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/geom/mesh.hpp"
#include "voxdesc/rng.hpp"

namespace voxdesc::data {

/// Unit-ish icosphere: subdivided icosahedron projected to radius `radius`.
geom::TriMesh icosphere(int subdivisions, Real radius = 1.0);

/// Capped tube of `rings` cross-sections with `segments` vertices each,
/// axis along +z, length `length`, base radius `radius`.
geom::TriMesh tube_mesh(int rings, int segments, Real length, Real radius);

// ---------------------------------------------------------------------------
// Rigid fragment pairs (pre-training data)
// ---------------------------------------------------------------------------

struct RigidPairConfig {
  int min_primitives = 3;
  int max_primitives = 8;
  Index scene_points = 2600;   // before fragmenting
  Index min_fragment_points = 200;
  Real fragment_fraction = 0.62;  // share of scene points per fragment
  Real overlap = 0.55;            // target |shared| / min(|P|, |Q|)
  bool full_overlap = false;      // both fragments take the whole scene
  Real noise_sigma = 0.0;         // per-fragment Gaussian noise, scene units
};

/// Two partially overlapping fragments of one synthetic scene, related by a
/// known rigid transform on the shared region.
struct FragmentPair {
  geom::PointCloud first;   // fragment P, scene units (unit bbox diagonal)
  geom::PointCloud second;  // fragment Q = T_gt(scene subset) + noise
  Mat3 rotation;            // T_gt
  Vec3 translation;
  /// Index pairs (i into first, j into second) with
  /// ||R * p_i + t - q_j|| <= tolerance. Exact duplicates of the same scene
  /// sample, so the noise-free residual is zero.
  std::vector<std::array<Index, 2>> correspondences;
  Real tolerance;      // 2x mean sampling spacing
  Real mean_spacing;   // mean 1-NN distance of the scene sampling
  Real overlap_ratio;  // achieved |corr| / min(|P|, |Q|)
};

FragmentPair gen_rigid_fragment_pair(const RigidPairConfig& config,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Deformable near-isometric pairs (evaluation data)
// ---------------------------------------------------------------------------

struct DeformableConfig {
  std::string shape = "sphere";  // "sphere" or "worm"
  int subdivisions = 3;          // sphere tessellation
  int rings = 40;                // worm tessellation
  int segments = 18;
  int n_bumps = 6;
  Real bump_amplitude = 0.22;
  Real deform_amplitude = 0.35;  // bump drift (sphere) / bend angle (worm)
  Real max_edge_distortion = 0.05;
};

/// Two meshes with identical connectivity; the ground-truth map is the
/// identity on vertex indices. Both meshes are unit-area normalized. The
/// deformation amplitude is halved until the worst relative edge-length
/// distortion fits the configured bound.
struct DeformablePair {
  geom::TriMesh first;
  geom::TriMesh second;
  Real edge_distortion;      // achieved max relative edge-length change
  bool amplitude_reduced;    // deform_amplitude was auto-reduced
  Real applied_amplitude;
};

DeformablePair gen_deformable_pair(const DeformableConfig& config,
                                   std::uint64_t seed);

}  // namespace voxdesc::data
