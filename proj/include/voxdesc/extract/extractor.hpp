// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/geom/mesh.hpp"
#include "voxdesc/net/network.hpp"
#include "voxdesc/patch/lrf.hpp"
#include "voxdesc/patch/voxelize.hpp"

namespace voxdesc::extract {

/// Patch extraction settings shared by pre-training, receptive-field
/// optimization and feature export. The receptive field passed to
/// build_patches is the cube half-width in cloud units; the other lengths
/// are tied to it.
struct ExtractorConfig {
  Real base_scale = 0.06;    // pre-training receptive field, cloud units
  Real lrf_radius = 0.12;    // frame support at scale == base_scale
  bool co_scale_lrf = true;  // grow the frame support with scale/base_scale
  Real margin = 1.5;         // crop half-width in units of scale
  int min_neighbors = 8;     // forwarded to the frame estimate
  patch::VoxelizeConfig voxel;
};

/// Voxelized patches for a set of anchors at one receptive-field scale.
/// Anchors without enough neighbors for a frame are dropped; near-isotropic
/// neighborhoods keep their fallback frame but are listed in `degenerate`
/// so callers can police the rate.
struct PatchSet {
  MatX grids;                  // grid_size x used, one patch per column
  std::vector<Points> locals;  // frame-coordinate points behind each column
  std::vector<Index> anchors;  // cloud index behind each column, input order
  std::vector<Index> dropped;
  std::vector<Index> degenerate;
  Real scale = 0.0;
};

PatchSet build_patches(const geom::PointCloud& cloud,
                       const std::vector<Index>& anchors, Real scale,
                       const ExtractorConfig& config);

/// dL/d(scale) for upstream = dL/d(grids) over a whole patch set. Patch
/// membership and frames are held fixed; only the rasterization responds to
/// the scale. That frozen-membership reading is the differentiable path the
/// receptive-field optimizer uses (membership still adapts between
/// iterations, because patches are rebuilt at the current scale each time).
Real patches_scale_grad(const PatchSet& patches, const ExtractorConfig& config,
                        const MatX& upstream);

/// Features of a prepared patch set, one row per used anchor. Pass a tape
/// to run net.backward on the same batch afterwards.
MatX features_from_patches(const net::Network& net, const PatchSet& patches,
                           net::Tape* tape = nullptr);

/// One call from cloud to features. Rows follow PatchSet.anchors of the
/// internally built set; use the two-step form when that list matters.
MatX extract_features(const net::Network& net, const geom::PointCloud& cloud,
                      const std::vector<Index>& anchors, Real scale,
                      const ExtractorConfig& config);

}  // namespace voxdesc::extract
