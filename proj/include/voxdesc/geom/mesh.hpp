// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "voxdesc/core.hpp"

namespace voxdesc::geom {

struct PointCloud {
  Points points;
  Points normals;  // optional; either empty or one row per point

  Index size() const { return points.rows(); }
  bool has_normals() const {
    return normals.rows() == points.rows() && points.rows() > 0;
  }
};

struct TriMesh {
  Points vertices;
  Faces faces;

  Index n_vertices() const { return vertices.rows(); }
  Index n_faces() const { return faces.rows(); }
};

/// Throws InvalidInput on empty or non-finite data.
void validate(const PointCloud& cloud);

/// Throws InvalidInput on out-of-range indices, repeated indices within a
/// face, or non-finite vertices.
void validate(const TriMesh& mesh);

VecX face_areas(const TriMesh& mesh);
Real total_area(const TriMesh& mesh);

/// Area-weighted centroid of the surface.
Vec3 area_centroid(const TriMesh& mesh);

/// Rescales to unit surface area with the area-weighted centroid at the
/// origin.
TriMesh normalize_unit_area(const TriMesh& mesh);

/// Centers the cloud at its bounding-box midpoint and scales the bounding-box
/// diagonal to one. The common normalization before patch extraction.
PointCloud normalize_unit_diagonal(const PointCloud& cloud);

Real bounding_box_diagonal(const Points& points);

/// Unique undirected edges, each with the lower vertex index first, sorted.
std::vector<std::array<int, 2>> mesh_edges(const TriMesh& mesh);

PointCloud cloud_from_mesh(const TriMesh& mesh);

}  // namespace voxdesc::geom
