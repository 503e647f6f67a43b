// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/net/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "voxdesc/error.hpp"
#include "voxdesc/hash.hpp"

namespace voxdesc::net {

namespace {

using nlohmann::json;

void append_f32_le(std::vector<unsigned char>& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  out.push_back(static_cast<unsigned char>(bits & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 24) & 0xff));
}

float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float value;
  std::memcpy(&value, &bits, 4);
  return value;
}

json arch_to_json(const NetConfig& arch) {
  return json{{"resolution", arch.resolution},
              {"channels", arch.channels},
              {"strides", arch.strides},
              {"feature_dim", arch.feature_dim},
              {"head_gain", arch.head_gain},
              {"norm_eps", arch.norm_eps}};
}

NetConfig arch_from_json(const json& j, const std::string& path) {
  if (!j.is_object())
    throw ParseError(path + ": \"arch\" must be an object");
  for (const char* key : {"resolution", "channels", "strides", "feature_dim",
                          "head_gain", "norm_eps"})
    if (!j.contains(key))
      throw ParseError(path + ": arch is missing \"" + key + "\"");
  NetConfig arch;
  try {
    arch.resolution = j.at("resolution").get<int>();
    arch.channels = j.at("channels").get<std::vector<int>>();
    arch.strides = j.at("strides").get<std::vector<int>>();
    arch.feature_dim = j.at("feature_dim").get<int>();
    arch.head_gain = j.at("head_gain").get<Real>();
    arch.norm_eps = j.at("norm_eps").get<Real>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad arch field: " + e.what());
  }
  return arch;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  const std::filesystem::path json_path(path);
  std::filesystem::path blob_path = json_path;
  blob_path.replace_extension(".bin");

  std::vector<unsigned char> blob;
  blob.reserve(static_cast<std::size_t>(checkpoint.params.total_size()) * 4);
  json blocks = json::array();
  Index offset = 0;
  for (const auto& block : checkpoint.params.blocks) {
    for (Index i = 0; i < block.value.size(); ++i)
      append_f32_le(blob, static_cast<float>(block.value(i)));
    blocks.push_back({{"name", block.name},
                      {"offset", offset},
                      {"count", block.value.size()}});
    offset += block.value.size();
  }
  Fnv1a hash;
  if (!blob.empty()) hash.update(blob.data(), blob.size());

  json manifest{{"format", "voxdesc-checkpoint-v1"},
                {"arch", arch_to_json(checkpoint.arch)},
                {"blob_file", blob_path.filename().string()},
                {"blob_checksum", "fnv1a:" + hash.hex()},
                {"blocks", blocks},
                {"meta", checkpoint.meta}};

  std::ofstream blob_out(blob_path, std::ios::binary | std::ios::trunc);
  if (!blob_out)
    throw ParseError("cannot write checkpoint blob " + blob_path.string());
  blob_out.write(reinterpret_cast<const char*>(blob.data()),
                 static_cast<std::streamsize>(blob.size()));
  blob_out.close();

  std::ofstream json_out(json_path, std::ios::trunc);
  if (!json_out)
    throw ParseError("cannot write checkpoint manifest " + json_path.string());
  json_out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream json_in(path);
  if (!json_in) throw ParseError("cannot open checkpoint manifest " + path);
  json manifest;
  try {
    json_in >> manifest;
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
  if (manifest.value("format", "") != "voxdesc-checkpoint-v1")
    throw ParseError(path + ": unknown checkpoint format");
  for (const char* key : {"arch", "blob_file", "blob_checksum", "blocks"})
    if (!manifest.contains(key))
      throw ParseError(path + ": missing \"" + key + "\"");

  Checkpoint checkpoint;
  checkpoint.arch = arch_from_json(manifest.at("arch"), path);
  checkpoint.meta = manifest.value("meta", json::object());

  const std::filesystem::path blob_path =
      std::filesystem::path(path).parent_path() /
      manifest.at("blob_file").get<std::string>();
  std::ifstream blob_in(blob_path, std::ios::binary);
  if (!blob_in)
    throw ParseError("cannot open checkpoint blob " + blob_path.string());
  std::vector<unsigned char> blob(
      (std::istreambuf_iterator<char>(blob_in)),
      std::istreambuf_iterator<char>());

  Index total = 0;
  for (const auto& entry : manifest.at("blocks"))
    total += entry.at("count").get<Index>();
  if (blob.size() != static_cast<std::size_t>(total) * 4)
    throw ParseError("checkpoint blob " + blob_path.string() +
                     " is truncated: expected " + std::to_string(total * 4) +
                     " bytes, found " + std::to_string(blob.size()));

  Fnv1a hash;
  if (!blob.empty()) hash.update(blob.data(), blob.size());
  if ("fnv1a:" + hash.hex() !=
      manifest.at("blob_checksum").get<std::string>())
    throw ParseError("checkpoint blob " + blob_path.string() +
                     " fails its checksum");

  for (const auto& entry : manifest.at("blocks")) {
    const auto name = entry.at("name").get<std::string>();
    const auto offset = entry.at("offset").get<Index>();
    const auto count = entry.at("count").get<Index>();
    if (offset < 0 || count < 0 || (offset + count) * 4 >
                                       static_cast<Index>(blob.size()))
      throw ParseError(path + ": block " + name + " lies outside the blob");
    VecX value(count);
    for (Index i = 0; i < count; ++i)
      value(i) = static_cast<Real>(
          read_f32_le(blob.data() + (offset + i) * 4));
    checkpoint.params.blocks.push_back({name, std::move(value)});
  }
  return checkpoint;
}

}  // namespace voxdesc::net
