// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>
#include <string>

#include "voxdesc/net/network.hpp"
#include "voxdesc/net/params.hpp"

namespace voxdesc::net {

/// On-disk model: a JSON manifest next to a raw little-endian float32 blob.
/// Parameters are stored in float32; saving what was just loaded reproduces
/// both files byte for byte.
struct Checkpoint {
  NetConfig arch;
  ParamSet params;
  nlohmann::json meta;  // extractor settings, training provenance, scales
};

/// Writes `<path>` (JSON manifest) and the blob next to it with a .bin
/// extension. The manifest stores the blob's FNV-1a checksum.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);

/// Throws ParseError on malformed manifests, size mismatches, or checksum
/// failures; the message names the offending file and byte counts.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace voxdesc::net
