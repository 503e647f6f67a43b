// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/geom/mesh.hpp"

namespace voxdesc::data {

/// Mesh files in ASCII OFF or ASCII PLY; the extension picks the format.
/// Loads validate the result and report malformed content as ParseError
/// with the offending line number.
void save_mesh(const std::string& path, const geom::TriMesh& mesh);
geom::TriMesh load_mesh(const std::string& path);

/// Point clouds as ASCII PLY; normals are written when present and read
/// back when the header declares nx/ny/nz.
void save_cloud(const std::string& path, const geom::PointCloud& cloud);
geom::PointCloud load_cloud(const std::string& path);

/// One header line, then numeric rows serialized with %.17g, so doubles
/// survive a write-read round trip bit-exactly.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const MatX& rows);
MatX read_csv(const std::string& path,
              std::vector<std::string>* columns = nullptr);

/// FNV-1a content hash of a file, for run manifests.
std::string hash_file(const std::string& path);

}  // namespace voxdesc::data
