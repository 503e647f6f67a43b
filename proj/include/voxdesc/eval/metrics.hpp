// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"
#include "voxdesc/geom/geodesic.hpp"
#include "voxdesc/geom/mesh.hpp"
#include "voxdesc/match/p2p.hpp"

namespace voxdesc::eval {

struct ErrorReport {
  /// Per source vertex; -1 where either map is masked out.
  VecX errors;
  /// Mean over the unmasked vertices.
  Real mean = 0.0;
  /// Rows (threshold, fraction of unmasked errors <= threshold). 100 uniform
  /// thresholds spanning [0, 0.25]; one extra row at the maximum error when
  /// it exceeds the grid, so the curve always ends at 1.
  MatX curve;
};

/// Geodesic distance on the target mesh between predicted and ground-truth
/// targets, per source vertex. Distances come from the unfolded-edge-graph
/// Dijkstra in geom; one search per distinct ground-truth target. Throws
/// NumericError when a needed distance is infinite (disconnected target) and
/// InvalidInput when no vertex survives both masks.
ErrorReport geodesic_error(const match::PointToPointMap& pred,
                           const match::PointToPointMap& gt,
                           const geom::TriMesh& target_mesh);

/// Mean Dirichlet energy of the feature channels: trace(F^T W F) / n_channels
/// with W the cotan stiffness of the mesh carrying the rows of F. Zero for
/// constant channels, and invariant to per-channel constant shifts.
Real dirichlet_energy(const MatX& features, const SparseMat& stiffness);

struct PcaReport {
  /// Share of total variance per principal component, descending.
  VecX explained;
  /// Entry c = share of variance the first c components leave unexplained;
  /// length explained.size() + 1, starts at 1 for zero components.
  VecX unexplained;
  /// One row per patch: coordinates on the first two components.
  MatX projection;
};

/// Centered PCA over flattened voxel grids (one grid per column, matching
/// PatchSet::grids). Decomposes whichever Gram matrix is smaller, the
/// patch-by-patch one or the voxel-by-voxel one. Throws NumericError when
/// the grids have no variance.
PcaReport patch_pca(const MatX& grids, int n_components);

/// Smallest component count whose cumulative explained share reaches
/// `fraction`, or -1 when the report's curve never gets there.
int components_to_explain(const PcaReport& report, Real fraction);

}  // namespace voxdesc::eval
