// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line harness for the voxdesc pipeline. One binary, sub-command
// style; every run resolves its config against a strict schema, hashes its
// inputs, and leaves a JSON manifest next to the outputs. All numeric
// artifacts are CSV/JSON and deterministic for a given config and seed, so
// rerunning a manifest reproduces them byte for byte (wall time lives only
// in the manifest).
//
// Exit codes: 0 success, 1 usage, 2 contract/validation failure, 3 numeric
// failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "voxdesc/core.hpp"
#include "voxdesc/data/io.hpp"
#include "voxdesc/data/synthetic.hpp"
#include "voxdesc/error.hpp"
#include "voxdesc/eval/metrics.hpp"
#include "voxdesc/extract/extractor.hpp"
#include "voxdesc/geom/mesh.hpp"
#include "voxdesc/geom/operators.hpp"
#include "voxdesc/match/fmap.hpp"
#include "voxdesc/match/p2p.hpp"
#include "voxdesc/net/checkpoint.hpp"
#include "voxdesc/net/network.hpp"
#include "voxdesc/patch/voxelize.hpp"
#include "voxdesc/pretrain/losses.hpp"
#include "voxdesc/pretrain/train.hpp"
#include "voxdesc/rfopt/mmd.hpp"
#include "voxdesc/rfopt/rfopt.hpp"
#include "voxdesc/rng.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace voxdesc;

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ParseError(path + ": config root must be an object");
  return j;
}

// Every key in `given` must exist in `defaults` with a compatible type; the
// defaults json doubles as the schema (integer-typed defaults demand
// integers, float-typed ones any number).
void validate_config(const json& defaults, const json& given,
                     const std::string& prefix) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string where = prefix + it.key();
    if (!defaults.contains(it.key()))
      throw InvalidInput("config: unknown key '" + where + "'");
    const json& d = defaults.at(it.key());
    const json& g = it.value();
    if (d.is_object()) {
      if (!g.is_object())
        throw InvalidInput("config: '" + where + "' must be an object");
      validate_config(d, g, where + ".");
    } else if (d.is_boolean()) {
      if (!g.is_boolean())
        throw InvalidInput("config: '" + where + "' must be a boolean");
    } else if (d.is_string()) {
      if (!g.is_string())
        throw InvalidInput("config: '" + where + "' must be a string");
    } else if (d.is_number_integer()) {
      if (!g.is_number_integer())
        throw InvalidInput("config: '" + where + "' must be an integer");
    } else if (d.is_number()) {
      if (!g.is_number())
        throw InvalidInput("config: '" + where + "' must be a number");
    }
  }
}

struct CommonOpts {
  std::string out;
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

// Defaults -> config file -> --seed flag, most specific wins. The result is
// the fully resolved config recorded in the manifest.
json resolve_config(const CommonOpts& opts, const json& defaults) {
  json resolved = defaults;
  if (!opts.config_path.empty()) {
    const json given = load_json_file(opts.config_path);
    validate_config(defaults, given, "");
    resolved.merge_patch(given);
  }
  if (opts.seed_given) resolved["seed"] = opts.seed;
  return resolved;
}

Real jreal(const json& j, const char* key) { return j.at(key).get<Real>(); }
std::int64_t jint(const json& j, const char* key) {
  return j.at(key).get<std::int64_t>();
}
std::uint64_t jseed(const json& j) { return j.at("seed").get<std::uint64_t>(); }

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

struct RunContext {
  std::string command;
  fs::path out_dir;
  json config;
  std::map<std::string, std::string> inputs;  // path -> content hash
  std::vector<std::string> outputs;           // relative to out_dir
  json result = json::object();
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();

  RunContext(std::string cmd, const std::string& out, json cfg)
      : command(std::move(cmd)), out_dir(out), config(std::move(cfg)) {
    fs::create_directories(out_dir);
  }

  void add_input(const std::string& path) {
    inputs[path] = data::hash_file(path);
  }

  std::string path(const std::string& name) {
    return (out_dir / name).string();
  }

  std::string output(const std::string& name) {
    outputs.push_back(name);
    return path(name);
  }

  void write_manifest() {
    const std::chrono::duration<double> elapsed =
        std::chrono::steady_clock::now() - start;
    json m;
    m["command"] = command;
    m["config"] = config;
    m["seed"] = config.contains("seed") ? config.at("seed") : json(0);
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["result"] = result;
    m["wall_seconds"] = elapsed.count();
    std::ofstream out(path("manifest-" + command + ".json"));
    out << m.dump(2) << "\n";
    if (!out) throw ParseError("cannot write manifest in " + out_dir.string());
  }
};

// ---------------------------------------------------------------------------
// Shared input loading
// ---------------------------------------------------------------------------

// .off is always a mesh; a .ply is a mesh exactly when its header declares a
// non-empty face element.
bool ply_has_faces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::string word;
  while (in >> word) {
    if (word == "end_header") break;
    if (word != "element") continue;
    std::string kind;
    long count = 0;
    if ((in >> kind >> count) && kind == "face" && count > 0) return true;
  }
  return false;
}

geom::PointCloud load_shape_as_cloud(const std::string& path) {
  const bool is_off = path.size() >= 4 && path.substr(path.size() - 4) == ".off";
  if (is_off || ply_has_faces(path))
    return geom::cloud_from_mesh(data::load_mesh(path));
  return data::load_cloud(path);
}

Index checked_index(Real value, Index limit, const std::string& what) {
  const Real rounded = std::nearbyint(value);
  if (rounded != value || rounded < 0 || rounded >= static_cast<Real>(limit))
    throw InvalidInput(what + ": index " + std::to_string(value) +
                       " out of range [0, " + std::to_string(limit) + ")");
  return static_cast<Index>(rounded);
}

// Maps are CSVs with columns source,target[,kept]; source must count up from
// zero so row order and vertex ids cannot drift apart.
match::PointToPointMap read_map_csv(const std::string& path, Index n_targets) {
  std::vector<std::string> columns;
  const MatX rows = data::read_csv(path, &columns);
  if (columns.size() < 2 || columns[0] != "source" || columns[1] != "target")
    throw InvalidInput(path + ": expected columns source,target[,kept]");
  match::PointToPointMap map;
  map.targets.resize(rows.rows());
  if (columns.size() > 2) map.valid.assign(static_cast<std::size_t>(rows.rows()), 1);
  for (Index i = 0; i < rows.rows(); ++i) {
    if (static_cast<Index>(rows(i, 0)) != i)
      throw InvalidInput(path + ": source column must count 0,1,2,...");
    const bool kept = columns.size() <= 2 || rows(i, 2) != 0.0;
    if (!kept) {
      map.valid[static_cast<std::size_t>(i)] = 0;
      map.targets[i] = 0;
      continue;
    }
    map.targets[i] = checked_index(rows(i, 1), n_targets, path);
  }
  return map;
}

void write_map_csv(const std::string& path, const match::PointToPointMap& map) {
  const bool masked = !map.valid.empty();
  MatX rows(map.size(), masked ? 3 : 2);
  for (Index i = 0; i < map.size(); ++i) {
    rows(i, 0) = static_cast<Real>(i);
    rows(i, 1) = static_cast<Real>(map.is_valid(i) ? map.targets[i] : -1);
    if (masked) rows(i, 2) = map.is_valid(i) ? 1.0 : 0.0;
  }
  data::write_csv(path, masked
                            ? std::vector<std::string>{"source", "target", "kept"}
                            : std::vector<std::string>{"source", "target"},
                  rows);
}

std::vector<std::string> feature_columns(Index dim) {
  std::vector<std::string> columns{"anchor"};
  for (Index i = 0; i < dim; ++i) columns.push_back("f" + std::to_string(i));
  return columns;
}

// Per-vertex features for matching: the anchor column must cover every
// vertex exactly once, in order.
MatX read_vertex_features(const std::string& path, Index n_vertices) {
  std::vector<std::string> columns;
  const MatX rows = data::read_csv(path, &columns);
  if (columns.size() < 2 || columns[0] != "anchor")
    throw InvalidInput(path + ": expected columns anchor,f0,f1,...");
  if (rows.rows() != n_vertices)
    throw InvalidInput(path + ": " + std::to_string(rows.rows()) +
                       " feature rows for " + std::to_string(n_vertices) +
                       " vertices; extract with full coverage first");
  for (Index i = 0; i < rows.rows(); ++i)
    if (static_cast<Index>(rows(i, 0)) != i)
      throw InvalidInput(path + ": anchor column must count 0,1,2,...");
  return rows.rightCols(rows.cols() - 1);
}

// Datasets are a dataset.json plus per-pair shape files, as written by
// gen-data. Paths inside the json are relative to its directory.
struct Dataset {
  fs::path dir;
  json meta;
};

Dataset load_dataset(RunContext& ctx, const std::string& path) {
  ctx.add_input(path);
  Dataset ds;
  ds.dir = fs::path(path).parent_path();
  ds.meta = load_json_file(path);
  if (!ds.meta.contains("kind") || !ds.meta.contains("pairs"))
    throw ParseError(path + ": not a dataset manifest (kind/pairs missing)");
  return ds;
}

std::string dataset_file(const Dataset& ds, const json& pair, const char* key) {
  return (ds.dir / pair.at(key).get<std::string>()).string();
}

// Every cloud in the dataset, fragments and mesh vertices alike.
std::vector<geom::PointCloud> dataset_clouds(RunContext& ctx, const Dataset& ds) {
  std::vector<geom::PointCloud> clouds;
  for (const json& pair : ds.meta.at("pairs")) {
    if (ds.meta.at("kind") == "rigid") {
      for (const char* key : {"p", "q"}) {
        const std::string file = dataset_file(ds, pair, key);
        ctx.add_input(file);
        clouds.push_back(data::load_cloud(file));
      }
    } else {
      for (const char* key : {"a", "b"}) {
        const std::string file = dataset_file(ds, pair, key);
        ctx.add_input(file);
        clouds.push_back(geom::cloud_from_mesh(data::load_mesh(file)));
      }
    }
  }
  return clouds;
}

std::vector<data::FragmentPair> load_rigid_pairs(RunContext& ctx,
                                                 const Dataset& ds,
                                                 std::int64_t max_pairs) {
  if (ds.meta.at("kind") != "rigid")
    throw InvalidInput("pre-training needs a rigid fragment dataset");
  std::vector<data::FragmentPair> pairs;
  for (const json& entry : ds.meta.at("pairs")) {
    if (max_pairs > 0 && static_cast<std::int64_t>(pairs.size()) >= max_pairs)
      break;
    data::FragmentPair pair;
    const std::string p_file = dataset_file(ds, entry, "p");
    const std::string q_file = dataset_file(ds, entry, "q");
    const std::string corr_file = dataset_file(ds, entry, "corr");
    ctx.add_input(p_file);
    ctx.add_input(q_file);
    ctx.add_input(corr_file);
    pair.first = data::load_cloud(p_file);
    pair.second = data::load_cloud(q_file);
    const auto rot = entry.at("rotation").get<std::vector<Real>>();
    const auto trans = entry.at("translation").get<std::vector<Real>>();
    if (rot.size() != 9 || trans.size() != 3)
      throw ParseError("dataset: malformed rotation/translation");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) pair.rotation(r, c) = rot[3 * r + c];
    pair.translation = Vec3(trans[0], trans[1], trans[2]);
    const MatX corr = data::read_csv(corr_file);
    pair.correspondences.reserve(static_cast<std::size_t>(corr.rows()));
    for (Index i = 0; i < corr.rows(); ++i)
      pair.correspondences.push_back(
          {checked_index(corr(i, 0), pair.first.size(), corr_file),
           checked_index(corr(i, 1), pair.second.size(), corr_file)});
    pair.tolerance = entry.at("tolerance").get<Real>();
    pair.mean_spacing = entry.at("mean_spacing").get<Real>();
    pair.overlap_ratio = entry.at("overlap_ratio").get<Real>();
    pairs.push_back(std::move(pair));
  }
  if (pairs.empty()) throw InvalidInput("dataset has no pairs");
  return pairs;
}

// ---------------------------------------------------------------------------
// Checkpoint metadata
// ---------------------------------------------------------------------------

json extractor_to_meta(const extract::ExtractorConfig& ex) {
  json j;
  j["base_scale"] = ex.base_scale;
  j["lrf_radius"] = ex.lrf_radius;
  j["co_scale_lrf"] = ex.co_scale_lrf;
  j["margin"] = ex.margin;
  j["min_neighbors"] = ex.min_neighbors;
  j["resolution"] = ex.voxel.resolution;
  j["sigma"] = ex.voxel.sigma;
  return j;
}

extract::ExtractorConfig extractor_from_meta(const json& meta) {
  extract::ExtractorConfig ex;
  if (!meta.contains("extractor")) return ex;
  const json& j = meta.at("extractor");
  ex.base_scale = j.value("base_scale", ex.base_scale);
  ex.lrf_radius = j.value("lrf_radius", ex.lrf_radius);
  ex.co_scale_lrf = j.value("co_scale_lrf", ex.co_scale_lrf);
  ex.margin = j.value("margin", ex.margin);
  ex.min_neighbors = j.value("min_neighbors", ex.min_neighbors);
  ex.voxel.resolution = j.value("resolution", ex.voxel.resolution);
  ex.voxel.sigma = j.value("sigma", ex.voxel.sigma);
  return ex;
}

Real checkpoint_scale(const net::Checkpoint& ck,
                      const extract::ExtractorConfig& ex) {
  return ck.meta.contains("scale") ? ck.meta.at("scale").get<Real>()
                                   : ex.base_scale;
}

// Features in blocks of a few hundred anchors: one giant batch would blow up
// the im2col scratch, and the blocks change nothing numerically.
struct ExtractedFeatures {
  MatX features;                // used x dim
  std::vector<Index> anchors;   // cloud index per row
  Index dropped = 0;
  Index degenerate = 0;
};

ExtractedFeatures extract_in_blocks(const net::Network& net,
                                    const geom::PointCloud& cloud,
                                    const std::vector<Index>& anchors,
                                    Real scale,
                                    const extract::ExtractorConfig& ex) {
  constexpr std::size_t kBlock = 512;
  ExtractedFeatures out;
  out.features.resize(static_cast<Index>(anchors.size()),
                      net.config().feature_dim);
  Index used = 0;
  for (std::size_t start = 0; start < anchors.size(); start += kBlock) {
    const std::size_t stop = std::min(anchors.size(), start + kBlock);
    const std::vector<Index> block(anchors.begin() + static_cast<std::ptrdiff_t>(start),
                                   anchors.begin() + static_cast<std::ptrdiff_t>(stop));
    const extract::PatchSet ps = extract::build_patches(cloud, block, scale, ex);
    if (ps.anchors.empty()) {
      out.dropped += static_cast<Index>(block.size());
      continue;
    }
    const MatX feats = extract::features_from_patches(net, ps);
    out.features.middleRows(used, feats.rows()) = feats;
    used += feats.rows();
    out.anchors.insert(out.anchors.end(), ps.anchors.begin(), ps.anchors.end());
    out.dropped += static_cast<Index>(ps.dropped.size());
    out.degenerate += static_cast<Index>(ps.degenerate.size());
  }
  out.features.conservativeResize(used, Eigen::NoChange);
  return out;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

json gen_data_defaults() {
  json d;
  d["kind"] = "rigid";
  d["count"] = 4;
  d["seed"] = 0;
  d["scale"] = 1.0;
  json r;
  r["min_primitives"] = 3;
  r["max_primitives"] = 8;
  r["scene_points"] = 2600;
  r["min_fragment_points"] = 200;
  r["fragment_fraction"] = 0.62;
  r["overlap"] = 0.55;
  r["full_overlap"] = false;
  r["noise_sigma"] = 0.0;
  d["rigid"] = r;
  json f;
  f["shape"] = "sphere";
  f["subdivisions"] = 3;
  f["rings"] = 40;
  f["segments"] = 18;
  f["n_bumps"] = 6;
  f["bump_amplitude"] = 0.22;
  f["deform_amplitude"] = 0.35;
  f["max_edge_distortion"] = 0.05;
  d["deformable"] = f;
  return d;
}

int run_gen_data(const CommonOpts& opts) {
  RunContext ctx("gen-data", opts.out, resolve_config(opts, gen_data_defaults()));
  if (!opts.config_path.empty()) ctx.add_input(opts.config_path);
  const json& cfg = ctx.config;
  const std::string kind = cfg.at("kind").get<std::string>();
  const std::int64_t count = jint(cfg, "count");
  const Real scale = jreal(cfg, "scale");
  const std::uint64_t seed = jseed(cfg);
  if (kind != "rigid" && kind != "deformable")
    throw InvalidInput("config: kind must be 'rigid' or 'deformable'");
  if (count < 1) throw InvalidInput("config: count must be positive");
  if (scale <= 0.0) throw InvalidInput("config: scale must be positive");
  if (kind == "deformable" && scale != 1.0)
    throw InvalidInput("config: scale applies to rigid datasets only");

  json dataset;
  dataset["kind"] = kind;
  dataset["count"] = count;
  dataset["seed"] = seed;
  dataset["config"] = cfg.at(kind);
  json pairs = json::array();

  char name[64];
  if (kind == "rigid") {
    dataset["scale"] = scale;
    data::RigidPairConfig pc;
    const json& r = cfg.at("rigid");
    pc.min_primitives = static_cast<int>(jint(r, "min_primitives"));
    pc.max_primitives = static_cast<int>(jint(r, "max_primitives"));
    pc.scene_points = jint(r, "scene_points");
    pc.min_fragment_points = jint(r, "min_fragment_points");
    pc.fragment_fraction = jreal(r, "fragment_fraction");
    pc.overlap = jreal(r, "overlap");
    pc.full_overlap = r.at("full_overlap").get<bool>();
    pc.noise_sigma = jreal(r, "noise_sigma");
    for (std::int64_t i = 0; i < count; ++i) {
      data::FragmentPair pair =
          data::gen_rigid_fragment_pair(pc, seed + static_cast<std::uint64_t>(i));
      if (scale != 1.0) {
        pair.first.points *= scale;
        pair.second.points *= scale;
        pair.translation *= scale;
        pair.tolerance *= scale;
        pair.mean_spacing *= scale;
      }
      json entry;
      std::snprintf(name, sizeof(name), "rigid_%04lld_p.ply",
                    static_cast<long long>(i));
      entry["p"] = name;
      data::save_cloud(ctx.output(name), pair.first);
      std::snprintf(name, sizeof(name), "rigid_%04lld_q.ply",
                    static_cast<long long>(i));
      entry["q"] = name;
      data::save_cloud(ctx.output(name), pair.second);
      std::snprintf(name, sizeof(name), "rigid_%04lld_corr.csv",
                    static_cast<long long>(i));
      entry["corr"] = name;
      MatX corr(static_cast<Index>(pair.correspondences.size()), 2);
      for (Index c = 0; c < corr.rows(); ++c) {
        corr(c, 0) = static_cast<Real>(pair.correspondences[static_cast<std::size_t>(c)][0]);
        corr(c, 1) = static_cast<Real>(pair.correspondences[static_cast<std::size_t>(c)][1]);
      }
      data::write_csv(ctx.output(name), {"first", "second"}, corr);
      std::vector<Real> rot;
      for (int rr = 0; rr < 3; ++rr)
        for (int cc = 0; cc < 3; ++cc) rot.push_back(pair.rotation(rr, cc));
      entry["rotation"] = rot;
      entry["translation"] = std::vector<Real>{
          pair.translation.x(), pair.translation.y(), pair.translation.z()};
      entry["tolerance"] = pair.tolerance;
      entry["mean_spacing"] = pair.mean_spacing;
      entry["overlap_ratio"] = pair.overlap_ratio;
      pairs.push_back(entry);
    }
  } else {
    dataset["gt_map"] = "identity";
    data::DeformableConfig dc;
    const json& f = cfg.at("deformable");
    dc.shape = f.at("shape").get<std::string>();
    dc.subdivisions = static_cast<int>(jint(f, "subdivisions"));
    dc.rings = static_cast<int>(jint(f, "rings"));
    dc.segments = static_cast<int>(jint(f, "segments"));
    dc.n_bumps = static_cast<int>(jint(f, "n_bumps"));
    dc.bump_amplitude = jreal(f, "bump_amplitude");
    dc.deform_amplitude = jreal(f, "deform_amplitude");
    dc.max_edge_distortion = jreal(f, "max_edge_distortion");
    for (std::int64_t i = 0; i < count; ++i) {
      const data::DeformablePair pair =
          data::gen_deformable_pair(dc, seed + static_cast<std::uint64_t>(i));
      json entry;
      std::snprintf(name, sizeof(name), "deform_%04lld_a.off",
                    static_cast<long long>(i));
      entry["a"] = name;
      data::save_mesh(ctx.output(name), pair.first);
      std::snprintf(name, sizeof(name), "deform_%04lld_b.off",
                    static_cast<long long>(i));
      entry["b"] = name;
      data::save_mesh(ctx.output(name), pair.second);
      entry["edge_distortion"] = pair.edge_distortion;
      entry["applied_amplitude"] = pair.applied_amplitude;
      entry["amplitude_reduced"] = pair.amplitude_reduced;
      pairs.push_back(entry);
    }
  }

  dataset["pairs"] = pairs;
  {
    std::ofstream out(ctx.output("dataset.json"));
    out << dataset.dump(2) << "\n";
    if (!out) throw ParseError("cannot write dataset.json");
  }
  ctx.result["pairs"] = count;
  ctx.write_manifest();
  std::printf("gen-data: %lld %s pair(s) in %s\n", static_cast<long long>(count),
              kind.c_str(), opts.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

json pretrain_defaults() {
  pretrain::PretrainConfig d;
  json j;
  j["loss"] = d.loss;
  j["tau"] = d.tau;
  j["anchors_per_step"] = static_cast<std::int64_t>(d.anchors_per_step);
  j["steps"] = d.steps;
  j["lr"] = d.lr;
  j["clip_norm"] = d.clip_norm;
  j["soft_temp"] = d.soft_temp;
  j["base_scale"] = d.extractor.base_scale;
  j["max_pairs"] = 0;
  j["seed"] = 0;
  return j;
}

int run_pretrain(const CommonOpts& opts, const std::string& data_path) {
  RunContext ctx("pretrain", opts.out, resolve_config(opts, pretrain_defaults()));
  if (!opts.config_path.empty()) ctx.add_input(opts.config_path);
  const json& cfg = ctx.config;

  const Dataset ds = load_dataset(ctx, data_path);
  const std::vector<data::FragmentPair> pairs =
      load_rigid_pairs(ctx, ds, jint(cfg, "max_pairs"));

  pretrain::PretrainConfig pc;
  pc.loss = cfg.at("loss").get<std::string>();
  pc.tau = jreal(cfg, "tau");
  pc.anchors_per_step = jint(cfg, "anchors_per_step");
  pc.steps = static_cast<int>(jint(cfg, "steps"));
  pc.lr = jreal(cfg, "lr");
  pc.clip_norm = jreal(cfg, "clip_norm");
  pc.soft_temp = jreal(cfg, "soft_temp");
  pc.seed = jseed(cfg);
  pc.extractor.base_scale = jreal(cfg, "base_scale");

  const pretrain::PretrainResult run = pretrain::pretrain_run(pairs, pc);

  net::Checkpoint ck;
  ck.arch = run.net;
  ck.params = run.params;
  ck.meta["scale"] = run.scale;
  ck.meta["extractor"] = extractor_to_meta(pc.extractor);
  ck.meta["loss"] = pc.loss;
  ck.meta["steps"] = pc.steps;
  ck.meta["seed"] = pc.seed;
  ck.meta["dataset"] = ctx.inputs.at(data_path);
  net::save_checkpoint(ck, ctx.output("checkpoint.json"));
  ctx.outputs.push_back("checkpoint.bin");

  MatX curve(static_cast<Index>(run.curve.size()), 2);
  for (Index i = 0; i < curve.rows(); ++i) {
    curve(i, 0) = static_cast<Real>(run.curve[static_cast<std::size_t>(i)].step);
    curve(i, 1) = run.curve[static_cast<std::size_t>(i)].loss;
  }
  data::write_csv(ctx.output("loss.csv"), {"step", "loss"}, curve);

  ctx.result["pairs"] = pairs.size();
  ctx.result["scale"] = run.scale;
  ctx.result["loss_first"] = run.curve.front().loss;
  ctx.result["loss_last"] = run.curve.back().loss;
  ctx.write_manifest();
  std::printf("pretrain: %s loss %zu pairs, %d steps, loss %.4f -> %.4f\n",
              pc.loss.c_str(), pairs.size(), pc.steps, run.curve.front().loss,
              run.curve.back().loss);
  return 0;
}

// ---------------------------------------------------------------------------
// rfopt
// ---------------------------------------------------------------------------

json rfopt_defaults() {
  rfopt::RfOptConfig d;
  json j;
  j["n_s"] = 800;
  j["n_t"] = d.n_t;
  j["bandwidth"] = d.bandwidth;
  j["lr"] = d.lr;
  j["max_iters"] = d.max_iters;
  j["tol"] = d.tol;
  j["patience"] = d.patience;
  j["min_scale"] = d.min_scale;
  j["max_scale"] = d.max_scale;
  j["source_batch"] = d.source_batch;
  j["full_eval_every"] = d.full_eval_every;
  j["eval_anchors"] = d.eval_anchors;
  j["seed"] = 0;
  return j;
}

int run_rfopt(const CommonOpts& opts, const std::string& checkpoint_path,
              const std::string& sources_path, const std::string& targets_path) {
  RunContext ctx("rfopt", opts.out, resolve_config(opts, rfopt_defaults()));
  if (!opts.config_path.empty()) ctx.add_input(opts.config_path);
  const json& cfg = ctx.config;

  ctx.add_input(checkpoint_path);
  const net::Checkpoint ck = net::load_checkpoint(checkpoint_path);
  const net::Network net(ck.arch, ck.params);
  extract::ExtractorConfig ex = extractor_from_meta(ck.meta);
  ex.base_scale = checkpoint_scale(ck, ex);

  const Dataset sources = load_dataset(ctx, sources_path);
  const Dataset targets = load_dataset(ctx, targets_path);
  const std::vector<geom::PointCloud> source_clouds = dataset_clouds(ctx, sources);
  const std::vector<geom::PointCloud> target_clouds = dataset_clouds(ctx, targets);

  rfopt::RfOptConfig rc;
  rc.n_t = static_cast<int>(jint(cfg, "n_t"));
  rc.bandwidth = jreal(cfg, "bandwidth");
  rc.lr = jreal(cfg, "lr");
  rc.max_iters = static_cast<int>(jint(cfg, "max_iters"));
  rc.tol = jreal(cfg, "tol");
  rc.patience = static_cast<int>(jint(cfg, "patience"));
  rc.min_scale = jreal(cfg, "min_scale");
  rc.max_scale = jreal(cfg, "max_scale");
  rc.source_batch = jint(cfg, "source_batch");
  rc.full_eval_every = static_cast<int>(jint(cfg, "full_eval_every"));
  rc.eval_anchors = jint(cfg, "eval_anchors");
  rc.seed = jseed(cfg);

  const rfopt::FeatureBank bank =
      rfopt::build_feature_bank(net, source_clouds, jint(cfg, "n_s"), ex,
                                rc.seed, ctx.inputs.at(checkpoint_path));
  const rfopt::RfOptResult res =
      rfopt::optimize_receptive_field(net, bank, target_clouds, ex, rc);

  MatX trace(static_cast<Index>(res.trace.size()), 4);
  for (Index i = 0; i < trace.rows(); ++i) {
    const rfopt::RfOptTracePoint& t = res.trace[static_cast<std::size_t>(i)];
    trace(i, 0) = static_cast<Real>(t.iter);
    trace(i, 1) = t.scale;
    trace(i, 2) = t.mmd;
    trace(i, 3) = t.full_bank ? 1.0 : 0.0;
  }
  data::write_csv(ctx.output("trace.csv"), {"iter", "scale", "mmd", "full_bank"},
                  trace);

  net::Checkpoint adapted = ck;
  adapted.meta["scale"] = res.scale;
  adapted.meta["pretrain_scale"] = ex.base_scale;
  adapted.meta["adapted_from"] = ctx.inputs.at(checkpoint_path);
  net::save_checkpoint(adapted, ctx.output("checkpoint-adapted.json"));
  ctx.outputs.push_back("checkpoint-adapted.bin");

  ctx.result["initial_scale"] = ex.base_scale;
  ctx.result["scale"] = res.scale;
  ctx.result["ratio"] = res.scale / ex.base_scale;
  ctx.result["initial_mmd"] = res.initial_mmd;
  ctx.result["final_mmd"] = res.final_mmd;
  ctx.result["bank_rows"] = bank.features.rows();
  ctx.write_manifest();
  std::printf("rfopt: s %.5f -> %.5f (ratio %.3f), mmd %.5f -> %.5f\n",
              ex.base_scale, res.scale, res.scale / ex.base_scale,
              res.initial_mmd, res.final_mmd);
  return 0;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

json extract_defaults() {
  json j;
  j["scale"] = 0.0;  // 0: the checkpoint's scale
  j["count"] = 0;    // 0: every point
  j["seed"] = 0;
  return j;
}

int run_extract(const CommonOpts& opts, const std::string& checkpoint_path,
                const std::string& input_path) {
  RunContext ctx("extract", opts.out, resolve_config(opts, extract_defaults()));
  if (!opts.config_path.empty()) ctx.add_input(opts.config_path);
  const json& cfg = ctx.config;

  ctx.add_input(checkpoint_path);
  ctx.add_input(input_path);
  const net::Checkpoint ck = net::load_checkpoint(checkpoint_path);
  const net::Network net(ck.arch, ck.params);
  const extract::ExtractorConfig ex = extractor_from_meta(ck.meta);
  const Real cfg_scale = jreal(cfg, "scale");
  const Real scale = cfg_scale > 0.0 ? cfg_scale : checkpoint_scale(ck, ex);

  const geom::PointCloud cloud = load_shape_as_cloud(input_path);
  const std::int64_t count = jint(cfg, "count");
  std::vector<Index> anchors;
  if (count <= 0 || count >= cloud.size()) {
    anchors.resize(static_cast<std::size_t>(cloud.size()));
    for (Index i = 0; i < cloud.size(); ++i)
      anchors[static_cast<std::size_t>(i)] = i;
  } else {
    Rng rng(jseed(cfg));
    anchors = rng.sample_without_replacement(cloud.size(), count);
    std::sort(anchors.begin(), anchors.end());
  }

  const ExtractedFeatures out = extract_in_blocks(net, cloud, anchors, scale, ex);
  MatX rows(out.features.rows(), out.features.cols() + 1);
  for (Index i = 0; i < rows.rows(); ++i)
    rows(i, 0) = static_cast<Real>(out.anchors[static_cast<std::size_t>(i)]);
  rows.rightCols(out.features.cols()) = out.features;
  data::write_csv(ctx.output("features.csv"), feature_columns(out.features.cols()),
                  rows);

  if (out.dropped > 0)
    std::fprintf(stderr,
                 "extract: %lld anchor(s) dropped for lack of neighbors\n",
                 static_cast<long long>(out.dropped));
  ctx.result["scale"] = scale;
  ctx.result["anchors"] = anchors.size();
  ctx.result["used"] = out.features.rows();
  ctx.result["dropped"] = out.dropped;
  ctx.result["degenerate"] = out.degenerate;
  ctx.write_manifest();
  std::printf("extract: %lld/%zu anchors at s=%.5f\n",
              static_cast<long long>(out.features.rows()), anchors.size(), scale);
  return 0;
}

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------

json match_defaults() {
  json j;
  j["k_seed"] = 30;
  j["k_end"] = 100;
  j["refine_steps"] = 10;
  j["seed"] = 0;
  return j;
}

int run_match(const CommonOpts& opts, const std::string& mesh_a_path,
              const std::string& mesh_b_path, const std::string& features_a_path,
              const std::string& features_b_path) {
  RunContext ctx("match", opts.out, resolve_config(opts, match_defaults()));
  if (!opts.config_path.empty()) ctx.add_input(opts.config_path);
  const json& cfg = ctx.config;
  const int k_seed = static_cast<int>(jint(cfg, "k_seed"));
  const int k_end = static_cast<int>(jint(cfg, "k_end"));
  const int refine_steps = static_cast<int>(jint(cfg, "refine_steps"));
  if (k_seed < 1 || k_end < k_seed)
    throw InvalidInput("config: need 1 <= k_seed <= k_end");
  if (refine_steps < 0 || (refine_steps == 0 && k_end != k_seed) ||
      (refine_steps > 0 && (k_end - k_seed) % refine_steps != 0))
    throw InvalidInput("config: refine_steps must split k_end - k_seed evenly");

  for (const std::string& path :
       {mesh_a_path, mesh_b_path, features_a_path, features_b_path})
    ctx.add_input(path);
  const geom::TriMesh mesh_a = data::load_mesh(mesh_a_path);
  const geom::TriMesh mesh_b = data::load_mesh(mesh_b_path);
  const MatX f_a = read_vertex_features(features_a_path, mesh_a.n_vertices());
  const MatX f_b = read_vertex_features(features_b_path, mesh_b.n_vertices());
  if (f_a.cols() != f_b.cols())
    throw InvalidInput("feature dimensions disagree between the two shapes");

  const match::NnMaps nn = match::pointwise_map(f_a, f_b);
  const match::PointToPointMap seed21 = match::mutual_filter(nn.t21, nn.t12);
  write_map_csv(ctx.output("mutual.csv"), seed21);

  const geom::SpectralBasis basis_a = geom::spectral_basis(mesh_a, k_end);
  const geom::SpectralBasis basis_b = geom::spectral_basis(mesh_b, k_end);
  const match::FunctionalMap c_seed =
      match::fmap_from_p2p(seed21, basis_a, basis_b, k_seed);
  const int step = refine_steps == 0 ? 0 : (k_end - k_seed) / refine_steps;
  const match::PointToPointMap map_ab =
      match::zoomout(c_seed, basis_a, basis_b, k_seed, k_end, step);
  write_map_csv(ctx.output("map_ab.csv"), map_ab);

  // The reverse map comes from refitting the refined correspondence with the
  // shapes' roles swapped.
  const match::FunctionalMap c_ba =
      match::fmap_from_p2p(map_ab, basis_b, basis_a, k_end);
  const match::PointToPointMap map_ba =
      match::p2p_from_fmap(c_ba, basis_b, basis_a);
  write_map_csv(ctx.output("map_ba.csv"), map_ba);

  ctx.result["vertices_a"] = mesh_a.n_vertices();
  ctx.result["vertices_b"] = mesh_b.n_vertices();
  ctx.result["mutual_kept"] = seed21.valid_count();
  ctx.result["k_seed"] = k_seed;
  ctx.result["k_end"] = k_end;
  ctx.write_manifest();
  std::printf("match: %lld mutual seeds, zoomout %d -> %d\n",
              static_cast<long long>(seed21.valid_count()), k_seed, k_end);
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

json eval_defaults() {
  json j;
  j["seed"] = 0;
  return j;
}

int run_eval(const CommonOpts& opts, const std::string& map_path,
             const std::string& target_mesh_path, const std::string& gt_path,
             const std::string& features_path,
             const std::string& features_mesh_path) {
  RunContext ctx("eval", opts.out, resolve_config(opts, eval_defaults()));
  if (!opts.config_path.empty()) ctx.add_input(opts.config_path);
  if (map_path.empty() && features_path.empty())
    throw InvalidInput("eval needs --map and/or --features");
  json summary;

  if (!map_path.empty()) {
    if (target_mesh_path.empty())
      throw InvalidInput("--map needs --target-mesh for geodesic distances");
    ctx.add_input(map_path);
    ctx.add_input(target_mesh_path);
    const geom::TriMesh mesh = data::load_mesh(target_mesh_path);
    const match::PointToPointMap pred =
        read_map_csv(map_path, mesh.n_vertices());
    match::PointToPointMap gt;
    if (!gt_path.empty()) {
      ctx.add_input(gt_path);
      gt = read_map_csv(gt_path, mesh.n_vertices());
    } else {
      // Without a ground truth the map is graded against the identity, the
      // convention for our deformable pairs.
      if (pred.size() > mesh.n_vertices())
        throw InvalidInput("identity ground truth needs matching vertex counts");
      gt.targets = IndexVec::LinSpaced(pred.size(), 0, pred.size() - 1);
    }
    const eval::ErrorReport report = eval::geodesic_error(pred, gt, mesh);
    MatX errors(report.errors.size(), 2);
    errors.col(0) = VecX::LinSpaced(report.errors.size(), 0,
                                    static_cast<Real>(report.errors.size() - 1));
    errors.col(1) = report.errors;
    data::write_csv(ctx.output("errors.csv"), {"vertex", "error"}, errors);
    data::write_csv(ctx.output("curve.csv"), {"threshold", "fraction"},
                    report.curve);
    summary["mean_geodesic_error"] = report.mean;
    summary["valid"] = pred.valid_count();
    ctx.result["mean_geodesic_error"] = report.mean;
  }

  if (!features_path.empty()) {
    if (features_mesh_path.empty())
      throw InvalidInput("--features needs --features-mesh for the stiffness");
    ctx.add_input(features_path);
    ctx.add_input(features_mesh_path);
    const geom::TriMesh mesh = data::load_mesh(features_mesh_path);
    const MatX features = read_vertex_features(features_path, mesh.n_vertices());
    const Real energy =
        eval::dirichlet_energy(features, geom::cotan_stiffness(mesh));
    summary["dirichlet"] = energy;
    ctx.result["dirichlet"] = energy;
  }

  {
    std::ofstream out(ctx.output("summary.json"));
    out << summary.dump(2) << "\n";
    if (!out) throw ParseError("cannot write summary.json");
  }
  ctx.write_manifest();
  std::printf("eval: %s\n", summary.dump().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// pca
// ---------------------------------------------------------------------------

json pca_defaults() {
  json j;
  j["n_patches"] = 5000;
  j["n_components"] = 64;
  j["scale"] = 0.06;
  j["seed"] = 0;
  return j;
}

int run_pca(const CommonOpts& opts, const std::string& data_path) {
  RunContext ctx("pca", opts.out, resolve_config(opts, pca_defaults()));
  if (!opts.config_path.empty()) ctx.add_input(opts.config_path);
  const json& cfg = ctx.config;
  const std::int64_t n_patches = jint(cfg, "n_patches");
  const int n_components = static_cast<int>(jint(cfg, "n_components"));
  const Real scale = jreal(cfg, "scale");
  if (n_patches < 2) throw InvalidInput("config: n_patches must be at least 2");

  const Dataset ds = load_dataset(ctx, data_path);
  const std::vector<geom::PointCloud> clouds = dataset_clouds(ctx, ds);
  extract::ExtractorConfig ex;
  ex.base_scale = scale;

  // Spread the patch budget evenly over the clouds, skipping what a cloud
  // cannot supply.
  Rng rng(jseed(cfg));
  std::vector<MatX> blocks;
  Index total = 0;
  Index remaining = n_patches;
  for (std::size_t c = 0; c < clouds.size(); ++c) {
    const Index left = static_cast<Index>(clouds.size() - c);
    const Index want =
        std::min(clouds[c].size(), (remaining + left - 1) / left);
    if (want <= 0) continue;
    const auto anchors = rng.sample_without_replacement(clouds[c].size(), want);
    constexpr std::size_t kBlock = 512;
    for (std::size_t start = 0; start < anchors.size(); start += kBlock) {
      const std::size_t stop = std::min(anchors.size(), start + kBlock);
      const std::vector<Index> block(
          anchors.begin() + static_cast<std::ptrdiff_t>(start),
          anchors.begin() + static_cast<std::ptrdiff_t>(stop));
      extract::PatchSet ps = extract::build_patches(clouds[c], block, scale, ex);
      if (ps.grids.cols() == 0) continue;
      total += ps.grids.cols();
      blocks.push_back(std::move(ps.grids));
    }
    remaining -= want;
  }
  if (total < 2) throw InvalidInput("pca: not enough usable patches");

  MatX grids(patch::grid_size(ex.voxel), total);
  Index at = 0;
  for (const MatX& block : blocks) {
    grids.middleCols(at, block.cols()) = block;
    at += block.cols();
  }
  blocks.clear();

  const int n_comp = std::min<int>(
      n_components, static_cast<int>(std::min<Index>(grids.rows(), total - 1)));
  const eval::PcaReport report = eval::patch_pca(grids, n_comp);

  MatX spectrum(static_cast<Index>(n_comp), 3);
  for (Index i = 0; i < n_comp; ++i) {
    spectrum(i, 0) = static_cast<Real>(i + 1);
    spectrum(i, 1) = report.explained(i);
    spectrum(i, 2) = report.unexplained(i + 1);
  }
  data::write_csv(ctx.output("spectrum.csv"),
                  {"component", "explained", "unexplained"}, spectrum);
  data::write_csv(ctx.output("projection.csv"), {"x", "y"}, report.projection);

  const int needed = eval::components_to_explain(report, 0.9);
  ctx.result["patches"] = total;
  ctx.result["components"] = n_comp;
  ctx.result["components_90"] = needed;
  ctx.write_manifest();
  std::printf("pca: %lld patches, %d components, 90%% at %d\n",
              static_cast<long long>(total), n_comp, needed);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct StageReport {
  std::string name;
  Real max_rel = 0.0;
  Real tol = 0.0;
  bool pass = true;
};

Real rel_mismatch(Real analytic, Real fd) {
  const Real mag = std::max(std::abs(analytic), std::abs(fd));
  if (mag < 1e-7) return 0.0;  // both negligible
  return std::abs(analytic - fd) / mag;
}

net::NetConfig gradcheck_net_config() {
  net::NetConfig config;
  config.resolution = 8;
  config.channels = {2, 4};
  config.strides = {2, 2};
  config.feature_dim = 4;
  return config;
}

extract::ExtractorConfig gradcheck_extractor() {
  extract::ExtractorConfig ex;
  ex.voxel.resolution = 8;
  return ex;
}

geom::PointCloud gradcheck_cloud() {
  data::RigidPairConfig pc;
  pc.scene_points = 900;
  pc.min_fragment_points = 150;
  return data::gen_rigid_fragment_pair(pc, 5).first;
}

MatX random_matrix(Index rows, Index cols, Rng& rng, Real sigma) {
  MatX m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = sigma * rng.normal();
  return m;
}

// d(grids)/d(scale) of the rasterizer, membership and frames frozen.
StageReport check_voxelize_scale() {
  StageReport report{"voxelize-scale", 0.0, 1e-4, true};
  const extract::ExtractorConfig ex = gradcheck_extractor();
  const geom::PointCloud cloud = gradcheck_cloud();
  Rng rng(11);
  const auto anchors = rng.sample_without_replacement(cloud.size(), 8);
  const Real s = ex.base_scale;
  const extract::PatchSet ps = extract::build_patches(cloud, anchors, s, ex);
  const MatX upstream = random_matrix(ps.grids.rows(), ps.grids.cols(), rng, 1.0);
  const Real analytic = extract::patches_scale_grad(ps, ex, upstream);
  const auto value_at = [&](Real at) {
    Real sum = 0.0;
    for (std::size_t i = 0; i < ps.locals.size(); ++i)
      sum += upstream.col(static_cast<Index>(i))
                 .dot(patch::voxelize(ps.locals[i], at, ex.voxel));
    return sum;
  };
  const Real h = 1e-5 * s;
  const Real fd = (value_at(s + h) - value_at(s - h)) / (2.0 * h);
  report.max_rel = rel_mismatch(analytic, fd);
  report.pass = report.max_rel < report.tol;
  return report;
}

// Parameter and input gradients of the CNN against central differences on a
// spread of coordinates per block.
StageReport check_network_backward() {
  StageReport report{"network-backward", 0.0, 1e-4, true};
  const net::NetConfig config = gradcheck_net_config();
  const net::Network net(config, 13);
  Rng rng(17);
  const Index cells = static_cast<Index>(config.resolution) *
                      config.resolution * config.resolution;
  MatX grids = random_matrix(cells, 5, rng, 1.0);
  grids = grids.unaryExpr([](Real x) { return 1.0 / (1.0 + std::exp(-x)); });
  const MatX upstream = random_matrix(config.feature_dim, grids.cols(), rng, 1.0);

  net::Tape tape;
  net.forward(grids, &tape);
  MatX grid_grads;
  const net::ParamSet grads = net.backward(tape, upstream, &grid_grads);

  const auto loss_with = [&](const net::ParamSet& params, const MatX& g) {
    const net::Network probe(config, params);
    return (upstream.array() * probe.forward(g).array()).sum();
  };

  for (std::size_t b = 0; b < grads.blocks.size(); ++b) {
    const Index size = grads.blocks[b].value.size();
    for (int k = 0; k < 4; ++k) {
      const Index at = (size * (2 * k + 1)) / 8;
      net::ParamSet probe = net.params();
      const Real h = 1e-5 * std::max<Real>(1.0, std::abs(probe.blocks[b].value[at]));
      probe.blocks[b].value[at] += h;
      const Real up = loss_with(probe, grids);
      probe.blocks[b].value[at] -= 2.0 * h;
      const Real down = loss_with(probe, grids);
      const Real fd = (up - down) / (2.0 * h);
      report.max_rel =
          std::max(report.max_rel, rel_mismatch(grads.blocks[b].value[at], fd));
    }
  }
  for (int k = 0; k < 6; ++k) {
    const Index at = static_cast<Index>(rng.uniform_int(grids.size()));
    MatX probe = grids;
    const Real h = 1e-6;
    probe(at) += h;
    const Real up = loss_with(net.params(), probe);
    probe(at) -= 2.0 * h;
    const Real down = loss_with(net.params(), probe);
    const Real fd = (up - down) / (2.0 * h);
    report.max_rel = std::max(report.max_rel, rel_mismatch(grid_grads(at), fd));
  }
  report.pass = report.max_rel < report.tol;
  return report;
}

StageReport check_nce() {
  StageReport report{"nce-loss", 0.0, 1e-4, true};
  Rng rng(23);
  MatX f_p = random_matrix(16, 6, rng, 0.3);
  MatX f_q = random_matrix(16, 6, rng, 0.3);
  const Real tau = 0.07;
  const pretrain::NceResult res = pretrain::nce_loss(f_p, f_q, tau);
  const Real h = 1e-6;
  for (int k = 0; k < 8; ++k) {
    const Index at = static_cast<Index>(rng.uniform_int(f_p.size()));
    for (int side = 0; side < 2; ++side) {
      MatX& probe = side == 0 ? f_p : f_q;
      const Real analytic = side == 0 ? res.df_p(at) : res.df_q(at);
      probe(at) += h;
      const Real up = pretrain::nce_loss(f_p, f_q, tau).loss;
      probe(at) -= 2.0 * h;
      const Real down = pretrain::nce_loss(f_p, f_q, tau).loss;
      probe(at) += h;
      report.max_rel =
          std::max(report.max_rel, rel_mismatch(analytic, (up - down) / (2.0 * h)));
    }
  }
  report.pass = report.max_rel < report.tol;
  return report;
}

StageReport check_cycle() {
  StageReport report{"cycle-alignment", 0.0, 1e-4, true};
  Rng rng(29);
  const Points p = random_matrix(18, 3, rng, 0.5);
  const Points q = random_matrix(18, 3, rng, 0.5);
  MatX f_p = random_matrix(18, 5, rng, 1.0);
  MatX f_q = random_matrix(18, 5, rng, 1.0);
  // The median heuristic would shift with the probe; freeze the temperature.
  const Real temp = pretrain::median_sq_dist(f_p, f_q);
  const pretrain::CycleChain chain = pretrain::cycle_alignment(p, q, f_p, f_q, temp);
  const Real h = 1e-6;
  for (int k = 0; k < 8; ++k) {
    const Index at = static_cast<Index>(rng.uniform_int(f_p.size()));
    for (int side = 0; side < 2; ++side) {
      MatX& probe = side == 0 ? f_p : f_q;
      const Real analytic = side == 0 ? chain.df_p(at) : chain.df_q(at);
      probe(at) += h;
      const Real up = pretrain::cycle_alignment(p, q, f_p, f_q, temp).loss;
      probe(at) -= 2.0 * h;
      const Real down = pretrain::cycle_alignment(p, q, f_p, f_q, temp).loss;
      probe(at) += h;
      report.max_rel =
          std::max(report.max_rel, rel_mismatch(analytic, (up - down) / (2.0 * h)));
    }
  }
  report.pass = report.max_rel < report.tol;
  return report;
}

StageReport check_mmd() {
  StageReport report{"mmd-targets", 0.0, 1e-4, true};
  Rng rng(31);
  const MatX bank = random_matrix(30, 6, rng, 0.5);
  MatX targets = random_matrix(12, 6, rng, 0.5);
  const Real bw = 0.4;
  const rfopt::MmdResult res = rfopt::mmd(bank, targets, bw);
  const Real h = 1e-6;
  for (int k = 0; k < 10; ++k) {
    const Index at = static_cast<Index>(rng.uniform_int(targets.size()));
    targets(at) += h;
    const Real up = rfopt::mmd(bank, targets, bw).value;
    targets(at) -= 2.0 * h;
    const Real down = rfopt::mmd(bank, targets, bw).value;
    targets(at) += h;
    report.max_rel = std::max(
        report.max_rel, rel_mismatch(res.dtargets(at), (up - down) / (2.0 * h)));
  }
  report.pass = report.max_rel < report.tol;
  return report;
}

// The whole frozen-weights chain: rasterize -> CNN -> discrepancy, derivative
// with respect to the receptive field.
StageReport check_composed_scale() {
  StageReport report{"composed-scale", 0.0, 1e-3, true};
  const net::Network net(gradcheck_net_config(), 37);
  const extract::ExtractorConfig ex = gradcheck_extractor();
  const geom::PointCloud cloud = gradcheck_cloud();
  Rng rng(41);
  const auto anchors = rng.sample_without_replacement(cloud.size(), 10);
  const Real s = ex.base_scale;
  const extract::PatchSet ps = extract::build_patches(cloud, anchors, s, ex);
  const MatX bank = random_matrix(24, net.config().feature_dim, rng, 0.05);
  const Real bw = 0.3;

  net::Tape tape;
  const MatX feats = extract::features_from_patches(net, ps, &tape);
  const rfopt::MmdResult loss = rfopt::mmd(bank, feats, bw);
  const MatX grid_grads = net.input_gradients(tape, loss.dtargets.transpose());
  const Real analytic = extract::patches_scale_grad(ps, ex, grid_grads);

  const auto value_at = [&](Real at) {
    MatX grids(ps.grids.rows(), ps.grids.cols());
    for (std::size_t i = 0; i < ps.locals.size(); ++i)
      grids.col(static_cast<Index>(i)) = patch::voxelize(ps.locals[i], at, ex.voxel);
    const MatX f = net.forward(grids).transpose();
    return rfopt::mmd(bank, f, bw).value;
  };
  const Real h = 1e-5 * s;
  const Real fd = (value_at(s + h) - value_at(s - h)) / (2.0 * h);
  report.max_rel = rel_mismatch(analytic, fd);
  report.pass = report.max_rel < report.tol;
  return report;
}

int run_gradcheck(const std::string& out) {
  const std::vector<StageReport> reports{
      check_voxelize_scale(), check_network_backward(), check_nce(),
      check_cycle(),          check_mmd(),              check_composed_scale()};
  int failures = 0;
  for (const StageReport& r : reports) {
    std::printf("%-18s max rel err %.3e (tol %.0e)  %s\n", r.name.c_str(),
                r.max_rel, r.tol, r.pass ? "ok" : "FAIL");
    if (!r.pass) ++failures;
  }
  if (!out.empty()) {
    RunContext ctx("gradcheck", out, json{{"seed", 0}});
    MatX rows(static_cast<Index>(reports.size()), 3);
    for (Index i = 0; i < rows.rows(); ++i) {
      const StageReport& r = reports[static_cast<std::size_t>(i)];
      rows(i, 0) = r.max_rel;
      rows(i, 1) = r.tol;
      rows(i, 2) = r.pass ? 1.0 : 0.0;
    }
    data::write_csv(ctx.output("gradcheck.csv"), {"max_rel_err", "tol", "pass"},
                    rows);
    ctx.result["failures"] = failures;
    ctx.write_manifest();
  }
  if (failures > 0)
    throw NumericError("gradcheck: " + std::to_string(failures) +
                       " stage(s) failed");
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// main
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("VOXDESC_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));

  CLI::App app{"voxdesc: rotation-invariant local features for deformable "
               "shape matching"};
  app.require_subcommand(1);

  const auto add_common = [](CLI::App* sub, CommonOpts& opts, bool need_out) {
    auto* out = sub->add_option("--out", opts.out, "output directory");
    if (need_out) out->required();
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--seed", opts.seed, "RNG seed (overrides the config)");
  };

  CommonOpts gen_opts;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  add_common(gen, gen_opts, true);

  CommonOpts pre_opts;
  std::string pre_data;
  auto* pre = app.add_subcommand("pretrain", "train the descriptor network");
  add_common(pre, pre_opts, true);
  pre->add_option("--data", pre_data, "rigid dataset.json")->required();

  CommonOpts rf_opts;
  std::string rf_checkpoint, rf_sources, rf_targets;
  auto* rf = app.add_subcommand("rfopt", "adapt the receptive field");
  add_common(rf, rf_opts, true);
  rf->add_option("--checkpoint", rf_checkpoint, "checkpoint manifest")->required();
  rf->add_option("--sources", rf_sources, "source dataset.json")->required();
  rf->add_option("--targets", rf_targets, "target dataset.json")->required();

  CommonOpts ex_opts;
  std::string ex_checkpoint, ex_input;
  auto* ex = app.add_subcommand("extract", "per-point features of a shape");
  add_common(ex, ex_opts, true);
  ex->add_option("--checkpoint", ex_checkpoint, "checkpoint manifest")->required();
  ex->add_option("--input", ex_input, "PLY cloud or OFF/PLY mesh")->required();

  CommonOpts match_opts;
  std::string match_mesh_a, match_mesh_b, match_features_a, match_features_b;
  auto* mt = app.add_subcommand("match", "dense map between two meshes");
  add_common(mt, match_opts, true);
  mt->add_option("--mesh-a", match_mesh_a, "first mesh")->required();
  mt->add_option("--mesh-b", match_mesh_b, "second mesh")->required();
  mt->add_option("--features-a", match_features_a, "features of mesh A")->required();
  mt->add_option("--features-b", match_features_b, "features of mesh B")->required();

  CommonOpts eval_opts;
  std::string eval_map, eval_target_mesh, eval_gt, eval_features, eval_features_mesh;
  auto* ev = app.add_subcommand("eval", "grade maps and features");
  add_common(ev, eval_opts, true);
  ev->add_option("--map", eval_map, "predicted map CSV");
  ev->add_option("--target-mesh", eval_target_mesh, "mesh the targets live on");
  ev->add_option("--gt", eval_gt, "ground-truth map CSV (default: identity)");
  ev->add_option("--features", eval_features, "feature CSV for Dirichlet energy");
  ev->add_option("--features-mesh", eval_features_mesh, "mesh of the features");

  CommonOpts pca_opts;
  std::string pca_data;
  auto* pc = app.add_subcommand("pca", "patch-space PCA of a dataset");
  add_common(pc, pca_opts, true);
  pc->add_option("--data", pca_data, "dataset.json")->required();

  std::string grad_out;
  bool grad_all = false;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gc->add_flag("--all", grad_all, "run every stage (the default)");
  gc->add_option("--out", grad_out, "optional report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    // --seed only overrides the config when actually given.
    gen_opts.seed_given = gen->count("--seed") > 0;
    pre_opts.seed_given = pre->count("--seed") > 0;
    rf_opts.seed_given = rf->count("--seed") > 0;
    ex_opts.seed_given = ex->count("--seed") > 0;
    match_opts.seed_given = mt->count("--seed") > 0;
    eval_opts.seed_given = ev->count("--seed") > 0;
    pca_opts.seed_given = pc->count("--seed") > 0;

    if (gen->parsed()) return run_gen_data(gen_opts);
    if (pre->parsed()) return run_pretrain(pre_opts, pre_data);
    if (rf->parsed())
      return run_rfopt(rf_opts, rf_checkpoint, rf_sources, rf_targets);
    if (ex->parsed()) return run_extract(ex_opts, ex_checkpoint, ex_input);
    if (mt->parsed())
      return run_match(match_opts, match_mesh_a, match_mesh_b, match_features_a,
                       match_features_b);
    if (ev->parsed())
      return run_eval(eval_opts, eval_map, eval_target_mesh, eval_gt,
                      eval_features, eval_features_mesh);
    if (pc->parsed()) return run_pca(pca_opts, pca_data);
    if (gc->parsed()) return run_gradcheck(grad_out);
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
