// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/extract/extractor.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "voxdesc/error.hpp"
#include "voxdesc/geom/knn.hpp"

namespace voxdesc::extract {

PatchSet build_patches(const geom::PointCloud& cloud,
                       const std::vector<Index>& anchors, Real scale,
                       const ExtractorConfig& config) {
  if (!(scale > 0.0))
    throw InvalidInput("build_patches: scale must be positive");
  if (!(config.base_scale > 0.0))
    throw InvalidInput("build_patches: base_scale must be positive");
  geom::validate(cloud);

  patch::LrfConfig lrf_config;
  lrf_config.radius = config.co_scale_lrf
                          ? config.lrf_radius * (scale / config.base_scale)
                          : config.lrf_radius;
  lrf_config.min_neighbors = config.min_neighbors;

  // One shared grid serves both query radii; radius_search widens its scan
  // when the radius exceeds the cell.
  const geom::UniformGrid accel(cloud.points,
                                std::max(lrf_config.radius,
                                         config.margin * scale));

  PatchSet set;
  set.scale = scale;
  std::vector<VecX> grids;
  for (const Index a : anchors) {
    if (a < 0 || a >= cloud.size())
      throw InvalidInput("build_patches: anchor index " + std::to_string(a) +
                         " out of range");
    patch::Lrf lrf;
    try {
      lrf = patch::estimate_lrf(cloud, a, lrf_config, &accel);
    } catch (const InvalidInput&) {
      set.dropped.push_back(a);
      continue;
    }
    if (lrf.degenerate) set.degenerate.push_back(a);
    Points local =
        patch::extract_patch(cloud, a, lrf, scale, config.margin, &accel);
    grids.push_back(patch::voxelize(local, scale, config.voxel));
    set.locals.push_back(std::move(local));
    set.anchors.push_back(a);
  }

  set.grids.resize(patch::grid_size(config.voxel),
                   static_cast<Index>(grids.size()));
  for (std::size_t i = 0; i < grids.size(); ++i)
    set.grids.col(static_cast<Index>(i)) = grids[i];
  return set;
}

Real patches_scale_grad(const PatchSet& patches, const ExtractorConfig& config,
                        const MatX& upstream) {
  if (upstream.rows() != patches.grids.rows() ||
      upstream.cols() != patches.grids.cols())
    throw InvalidInput("patches_scale_grad: upstream shape mismatch");
  Real grad = 0.0;
  for (Index i = 0; i < upstream.cols(); ++i)
    grad += patch::voxelize_backward(patches.locals[static_cast<std::size_t>(i)],
                                     patches.scale, config.voxel,
                                     upstream.col(i));
  return grad;
}

MatX features_from_patches(const net::Network& net, const PatchSet& patches,
                           net::Tape* tape) {
  return net.forward(patches.grids, tape).transpose();
}

MatX extract_features(const net::Network& net, const geom::PointCloud& cloud,
                      const std::vector<Index>& anchors, Real scale,
                      const ExtractorConfig& config) {
  return features_from_patches(net, build_patches(cloud, anchors, scale, config));
}

}  // namespace voxdesc::extract
