// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/data/synthetic.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <unordered_map>
#include <utility>

#include "voxdesc/error.hpp"
#include "voxdesc/geom/knn.hpp"

namespace voxdesc::data {

namespace {

constexpr Real kPi = std::numbers::pi_v<Real>;

// ---------------------------------------------------------------------------
// Icosphere
// ---------------------------------------------------------------------------

struct MeshBuilder {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  geom::TriMesh finish() const {
    geom::TriMesh mesh;
    mesh.vertices.resize(static_cast<Index>(vertices.size()), 3);
    for (std::size_t i = 0; i < vertices.size(); ++i)
      mesh.vertices.row(static_cast<Index>(i)) = vertices[i];
    mesh.faces.resize(static_cast<Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f)
      for (int c = 0; c < 3; ++c)
        mesh.faces(static_cast<Index>(f), c) = faces[f][c];
    return mesh;
  }
};

}  // namespace

geom::TriMesh icosphere(int subdivisions, Real radius) {
  if (subdivisions < 0 || subdivisions > 6)
    throw InvalidInput("icosphere: subdivisions must be in [0, 6]");
  if (!(radius > 0.0)) throw InvalidInput("icosphere: radius must be positive");

  const Real t = (1.0 + std::sqrt(5.0)) / 2.0;
  MeshBuilder b;
  b.vertices = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
                {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
                {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
  b.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int i, int j) {
      const auto key = std::minmax(i, j);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(b.vertices.size());
      b.vertices.push_back(0.5 * (b.vertices[static_cast<std::size_t>(i)] +
                                  b.vertices[static_cast<std::size_t>(j)]));
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(b.faces.size() * 4);
    for (const auto& f : b.faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    b.faces = std::move(next);
  }

  for (auto& v : b.vertices) v = radius * v.normalized();
  return b.finish();
}

geom::TriMesh tube_mesh(int rings, int segments, Real length, Real radius) {
  if (rings < 2 || segments < 3)
    throw InvalidInput("tube_mesh: need at least 2 rings and 3 segments");
  if (!(length > 0.0) || !(radius > 0.0))
    throw InvalidInput("tube_mesh: length and radius must be positive");

  MeshBuilder b;
  for (int r = 0; r < rings; ++r) {
    const Real z = length * (static_cast<Real>(r) / (rings - 1) - 0.5);
    for (int s = 0; s < segments; ++s) {
      const Real a = 2.0 * kPi * s / segments;
      b.vertices.push_back({radius * std::cos(a), radius * std::sin(a), z});
    }
  }
  auto ring_vertex = [&](int r, int s) { return r * segments + (s % segments); };
  for (int r = 0; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      const int a = ring_vertex(r, s), bb = ring_vertex(r, s + 1);
      const int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
      b.faces.push_back({a, bb, d});
      b.faces.push_back({a, d, c});
    }
  const int bottom = static_cast<int>(b.vertices.size());
  b.vertices.push_back({0, 0, -length / 2});
  const int top = static_cast<int>(b.vertices.size());
  b.vertices.push_back({0, 0, length / 2});
  for (int s = 0; s < segments; ++s) {
    b.faces.push_back({bottom, ring_vertex(0, s + 1), ring_vertex(0, s)});
    b.faces.push_back(
        {top, ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1)});
  }
  return b.finish();
}

// ---------------------------------------------------------------------------
// Primitive scenes
// ---------------------------------------------------------------------------

namespace {

Real sign_pow(Real v, Real e) {
  return std::copysign(std::pow(std::abs(v), e), v);
}

struct Primitive {
  enum Kind { kPlane, kSphere, kCylinder, kSuperellipsoid };
  Kind kind;
  Mat3 rot;
  Vec3 pos;
  Real a = 1, b = 1, c = 1;  // extents / radii
  Real e1 = 1, e2 = 1;       // superellipsoid exponents

  Real area_estimate() const {
    switch (kind) {
      case kPlane:
        return a * b;
      case kSphere:
        return 4.0 * kPi * a * a;
      case kCylinder:
        return 2.0 * kPi * a * b;
      case kSuperellipsoid: {
        // Thomsen's ellipsoid approximation; exponent shape changes area by
        // a modest factor, which only skews the per-primitive allocation.
        const Real p = 1.6075;
        const Real ap = std::pow(a, p), bp = std::pow(b, p),
                   cp = std::pow(c, p);
        return 4.0 * kPi * std::pow((ap * bp + ap * cp + bp * cp) / 3.0,
                                    1.0 / p);
      }
    }
    return 0.0;
  }

  Vec3 superellipsoid_local(Real eta, Real omega) const {
    const Real ce = sign_pow(std::cos(eta), e1);
    return Vec3(a * ce * sign_pow(std::cos(omega), e2),
                b * ce * sign_pow(std::sin(omega), e2),
                c * sign_pow(std::sin(eta), e1));
  }

  // One surface sample in local coordinates with its outward normal.
  // Superellipsoids use rejection sampling against the parametric area
  // element to stay approximately uniform.
  std::pair<Vec3, Vec3> sample_local(Rng& rng, Real se_weight_max) const {
    switch (kind) {
      case kPlane: {
        const Vec3 p(rng.uniform(-0.5 * a, 0.5 * a),
                     rng.uniform(-0.5 * b, 0.5 * b), 0.0);
        return {p, Vec3(0, 0, 1)};
      }
      case kSphere: {
        Vec3 dir = rng.normal3();
        while (dir.norm() < 1e-9) dir = rng.normal3();
        dir.normalize();
        return {a * dir, dir};
      }
      case kCylinder: {
        const Real theta = rng.uniform(0.0, 2.0 * kPi);
        const Real z = rng.uniform(-0.5 * b, 0.5 * b);
        const Vec3 n(std::cos(theta), std::sin(theta), 0.0);
        return {Vec3(a * n.x(), a * n.y(), z), n};
      }
      case kSuperellipsoid: {
        constexpr Real kPole = 0.03;
        for (int tries = 0; tries < 256; ++tries) {
          const Real eta = rng.uniform(-kPi / 2 + kPole, kPi / 2 - kPole);
          const Real omega = rng.uniform(-kPi, kPi);
          const Real w = superellipsoid_weight(eta, omega);
          if (rng.uniform() * se_weight_max <= w) {
            const Vec3 p = superellipsoid_local(eta, omega);
            Vec3 n(sign_pow(std::cos(eta), 2 - e1) *
                       sign_pow(std::cos(omega), 2 - e2) / a,
                   sign_pow(std::cos(eta), 2 - e1) *
                       sign_pow(std::sin(omega), 2 - e2) / b,
                   sign_pow(std::sin(eta), 2 - e1) / c);
            if (n.norm() < 1e-12) n = p;
            return {p, n.normalized()};
          }
        }
        // Extremely unlikely with the clamped exponents; fall back to a pole.
        return {superellipsoid_local(0.0, 0.0), Vec3(1, 0, 0)};
      }
    }
    throw NumericError("unreachable primitive kind");
  }

  Real superellipsoid_weight(Real eta, Real omega) const {
    const Real h = 1e-4;
    const Vec3 de = (superellipsoid_local(eta + h, omega) -
                     superellipsoid_local(eta - h, omega)) /
                    (2 * h);
    const Vec3 dw = (superellipsoid_local(eta, omega + h) -
                     superellipsoid_local(eta, omega - h)) /
                    (2 * h);
    return de.cross(dw).norm();
  }

  Real superellipsoid_weight_bound() const {
    Real w_max = 0.0;
    for (int i = 1; i < 24; ++i)
      for (int j = 0; j < 48; ++j) {
        const Real eta = -kPi / 2 + kPi * i / 24.0;
        const Real omega = -kPi + 2.0 * kPi * j / 48.0;
        w_max = std::max(w_max, superellipsoid_weight(eta, omega));
      }
    return 1.5 * w_max;
  }
};

Primitive random_primitive(Rng& rng) {
  Primitive prim;
  prim.kind = static_cast<Primitive::Kind>(rng.uniform_int(4));
  prim.rot = rng.random_rotation();
  prim.pos = Vec3(rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85),
                  rng.uniform(0.15, 0.85));
  switch (prim.kind) {
    case Primitive::kPlane:
      prim.a = rng.uniform(0.3, 0.8);
      prim.b = rng.uniform(0.3, 0.8);
      break;
    case Primitive::kSphere:
      prim.a = rng.uniform(0.12, 0.3);
      break;
    case Primitive::kCylinder:
      prim.a = rng.uniform(0.08, 0.2);   // radius
      prim.b = rng.uniform(0.3, 0.7);    // height
      break;
    case Primitive::kSuperellipsoid:
      prim.a = rng.uniform(0.1, 0.28);
      prim.b = rng.uniform(0.1, 0.28);
      prim.c = rng.uniform(0.1, 0.28);
      prim.e1 = rng.uniform(0.7, 1.3);
      prim.e2 = rng.uniform(0.7, 1.3);
      break;
  }
  return prim;
}

// Greedy Poisson thinning: keep a candidate if no kept point lies within
// r_min. Candidates are visited in pre-shuffled order, so the result is
// deterministic for a fixed stream.
std::vector<int> poisson_thin(const Points& candidates, Real r_min) {
  std::unordered_map<std::int64_t, std::vector<int>> cells;
  auto cell_key = [&](const Vec3& p) {
    const auto q = [&](Real v) {
      return static_cast<std::int64_t>(std::floor(v / r_min)) + (1 << 20);
    };
    return (q(p.x()) << 42) | (q(p.y()) << 21) | q(p.z());
  };
  std::vector<int> kept;
  const Real r2 = r_min * r_min;
  for (Index i = 0; i < candidates.rows(); ++i) {
    const Vec3 p = candidates.row(i);
    bool blocked = false;
    const std::int64_t base = cell_key(p);
    for (std::int64_t dx = -1; dx <= 1 && !blocked; ++dx)
      for (std::int64_t dy = -1; dy <= 1 && !blocked; ++dy)
        for (std::int64_t dz = -1; dz <= 1 && !blocked; ++dz) {
          const auto it =
              cells.find(base + (dx << 42) + (dy << 21) + dz);
          if (it == cells.end()) continue;
          for (const int j : it->second)
            if ((Vec3(candidates.row(j)) - p).squaredNorm() < r2) {
              blocked = true;
              break;
            }
        }
    if (!blocked) {
      kept.push_back(static_cast<int>(i));
      cells[base].push_back(static_cast<int>(i));
    }
  }
  return kept;
}

Real mean_nearest_neighbor_distance(const Points& points, Rng& rng) {
  const Index n = points.rows();
  const Index sample = std::min<Index>(n, 200);
  const auto chosen = rng.sample_without_replacement(n, sample);
  Real sum = 0.0;
  for (const Index q : chosen) {
    Real best = std::numeric_limits<Real>::infinity();
    for (Index i = 0; i < n; ++i) {
      if (i == q) continue;
      best = std::min(best,
                      (points.row(i) - points.row(q)).squaredNorm());
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<Real>(sample);
}

std::vector<int> ball_indices(const Points& points, const Vec3& center,
                              Real radius) {
  std::vector<int> out;
  const Real r2 = radius * radius;
  for (Index i = 0; i < points.rows(); ++i)
    if ((Vec3(points.row(i)) - center).squaredNorm() <= r2)
      out.push_back(static_cast<int>(i));
  return out;
}

Real quantile_radius(const Points& points, const Vec3& center, Real frac) {
  std::vector<Real> d2(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i)
    d2[static_cast<std::size_t>(i)] =
        (Vec3(points.row(i)) - center).squaredNorm();
  const auto k = static_cast<std::size_t>(
      std::clamp<Real>(frac * static_cast<Real>(points.rows()) - 1, 0,
                       static_cast<Real>(points.rows() - 1)));
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k),
                   d2.end());
  return std::sqrt(d2[k]);
}

std::size_t shared_count(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib)
      ++ia;
    else if (*ib < *ia)
      ++ib;
    else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

}  // namespace

FragmentPair gen_rigid_fragment_pair(const RigidPairConfig& config,
                                     std::uint64_t seed) {
  if (config.min_primitives < 1 ||
      config.max_primitives < config.min_primitives)
    throw InvalidInput("gen_rigid_fragment_pair: bad primitive count range");
  if (config.scene_points < 2 * config.min_fragment_points)
    throw InvalidInput(
        "gen_rigid_fragment_pair: scene_points too small for the requested "
        "fragment size");
  if (!(config.overlap > 0.0 && config.overlap <= 1.0))
    throw InvalidInput("gen_rigid_fragment_pair: overlap must be in (0, 1]");
  if (config.noise_sigma < 0.0)
    throw InvalidInput("gen_rigid_fragment_pair: negative noise");

  Rng rng(seed);
  Rng scene_rng = rng.child(1);
  Rng frag_rng = rng.child(2);
  Rng noise_rng = rng.child(3);

  // Scene: a handful of primitive shells, oversampled then Poisson-thinned.
  const int n_prim =
      config.min_primitives +
      static_cast<int>(scene_rng.uniform_int(
          config.max_primitives - config.min_primitives + 1));
  std::vector<Primitive> prims;
  prims.reserve(static_cast<std::size_t>(n_prim));
  Real total_area = 0.0;
  for (int i = 0; i < n_prim; ++i) {
    prims.push_back(random_primitive(scene_rng));
    total_area += prims.back().area_estimate();
  }

  const Index oversample = config.scene_points * 3;
  Points raw(oversample, 3);
  Points raw_normals(oversample, 3);
  Index row = 0;
  for (int i = 0; i < n_prim; ++i) {
    const Primitive& prim = prims[static_cast<std::size_t>(i)];
    Index budget = static_cast<Index>(std::llround(
        static_cast<Real>(oversample) * prim.area_estimate() / total_area));
    if (i == n_prim - 1) budget = oversample - row;
    budget = std::min(budget, oversample - row);
    const Real se_bound = prim.kind == Primitive::kSuperellipsoid
                              ? prim.superellipsoid_weight_bound()
                              : 0.0;
    for (Index s = 0; s < budget; ++s, ++row) {
      const auto [p, n] = prim.sample_local(scene_rng, se_bound);
      raw.row(row) = (prim.rot * p + prim.pos).transpose();
      raw_normals.row(row) = (prim.rot * n).transpose();
    }
  }
  raw.conservativeResize(row, 3);
  raw_normals.conservativeResize(row, 3);

  // Shuffle candidate order so thinning has no per-primitive bias.
  std::vector<int> order(static_cast<std::size_t>(row));
  for (Index i = 0; i < row; ++i) order[static_cast<std::size_t>(i)] = (int)i;
  scene_rng.shuffle(order);
  Points shuffled(row, 3), shuffled_normals(row, 3);
  for (Index i = 0; i < row; ++i) {
    shuffled.row(i) = raw.row(order[static_cast<std::size_t>(i)]);
    shuffled_normals.row(i) = raw_normals.row(order[static_cast<std::size_t>(i)]);
  }

  const Real r_min =
      0.75 * std::sqrt(total_area / static_cast<Real>(config.scene_points));
  const std::vector<int> kept = poisson_thin(shuffled, r_min);
  Points scene(static_cast<Index>(kept.size()), 3);
  Points scene_normals(static_cast<Index>(kept.size()), 3);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    scene.row(static_cast<Index>(i)) = shuffled.row(kept[i]);
    scene_normals.row(static_cast<Index>(i)) = shuffled_normals.row(kept[i]);
  }
  if (scene.rows() < 2 * config.min_fragment_points)
    throw InvalidInput(
        "gen_rigid_fragment_pair: thinning left too few scene points");

  // Canonical units: scene bounding-box diagonal = 1, centered.
  {
    const Vec3 lo = scene.colwise().minCoeff();
    const Vec3 hi = scene.colwise().maxCoeff();
    const Real diag = (hi - lo).norm();
    if (!(diag > 0.0))
      throw NumericError("gen_rigid_fragment_pair: degenerate scene extent");
    scene = (scene.rowwise() - (0.5 * (lo + hi)).transpose()) / diag;
  }

  const Real spacing = mean_nearest_neighbor_distance(scene, frag_rng);

  // Fragment index sets.
  std::vector<int> idx1, idx2;
  Real achieved = 1.0;
  if (config.full_overlap) {
    idx1.resize(static_cast<std::size_t>(scene.rows()));
    for (Index i = 0; i < scene.rows(); ++i)
      idx1[static_cast<std::size_t>(i)] = static_cast<int>(i);
    idx2 = idx1;
  } else {
    bool found = false;
    for (int attempt = 0; attempt < 16 && !found; ++attempt) {
      const Index anchor = frag_rng.uniform_int(scene.rows());
      const Vec3 c1 = scene.row(anchor);
      const Real radius1 = quantile_radius(scene, c1, config.fragment_fraction);
      const std::vector<int> cand1 = ball_indices(scene, c1, radius1);
      if (cand1.size() <
          static_cast<std::size_t>(config.min_fragment_points))
        continue;
      Vec3 dir = frag_rng.normal3();
      if (dir.norm() < 1e-9) dir = Vec3(1, 0, 0);
      dir.normalize();
      // The shared fraction decreases as the second center moves away;
      // bisect the step length to hit the overlap target.
      Real lo_step = 0.0, hi_step = 1.5;
      std::vector<int> best2;
      Real best_ratio = -1.0;
      for (int iter = 0; iter < 36; ++iter) {
        const Real step = 0.5 * (lo_step + hi_step);
        const Vec3 c2 = c1 + step * dir;
        const Real radius2 =
            quantile_radius(scene, c2, config.fragment_fraction);
        std::vector<int> cand2 = ball_indices(scene, c2, radius2);
        const Real ratio =
            cand2.empty()
                ? 0.0
                : static_cast<Real>(shared_count(cand1, cand2)) /
                      static_cast<Real>(std::min(cand1.size(), cand2.size()));
        if (std::abs(ratio - config.overlap) <
            std::abs(best_ratio - config.overlap)) {
          best_ratio = ratio;
          best2 = std::move(cand2);
        }
        if (ratio > config.overlap)
          lo_step = step;
        else
          hi_step = step;
      }
      if (best_ratio < 0.0 ||
          std::abs(best_ratio - config.overlap) > 0.08 ||
          best2.size() < static_cast<std::size_t>(config.min_fragment_points))
        continue;
      idx1 = cand1;
      idx2 = std::move(best2);
      achieved = best_ratio;
      found = true;
    }
    if (!found)
      throw InvalidInput(
          "gen_rigid_fragment_pair: could not reach the overlap target; "
          "relax overlap or enlarge the scene");
  }

  FragmentPair pair;
  pair.rotation = frag_rng.random_rotation();
  pair.translation = Vec3(frag_rng.uniform(-0.3, 0.3),
                          frag_rng.uniform(-0.3, 0.3),
                          frag_rng.uniform(-0.3, 0.3));
  pair.mean_spacing = spacing;
  pair.tolerance = 2.0 * spacing;

  pair.first.points.resize(static_cast<Index>(idx1.size()), 3);
  pair.first.normals.resize(static_cast<Index>(idx1.size()), 3);
  for (std::size_t i = 0; i < idx1.size(); ++i) {
    pair.first.points.row(static_cast<Index>(i)) = scene.row(idx1[i]);
    pair.first.normals.row(static_cast<Index>(i)) = scene_normals.row(idx1[i]);
  }
  pair.second.points.resize(static_cast<Index>(idx2.size()), 3);
  pair.second.normals.resize(static_cast<Index>(idx2.size()), 3);
  for (std::size_t i = 0; i < idx2.size(); ++i) {
    const Vec3 p = scene.row(idx2[i]);
    pair.second.points.row(static_cast<Index>(i)) =
        (pair.rotation * p + pair.translation).transpose();
    pair.second.normals.row(static_cast<Index>(i)) =
        (pair.rotation * Vec3(scene_normals.row(idx2[i]))).transpose();
  }
  if (config.noise_sigma > 0.0) {
    for (Index i = 0; i < pair.first.points.rows(); ++i)
      pair.first.points.row(i) +=
          (config.noise_sigma * noise_rng.normal3()).transpose();
    for (Index i = 0; i < pair.second.points.rows(); ++i)
      pair.second.points.row(i) +=
          (config.noise_sigma * noise_rng.normal3()).transpose();
  }

  // Shared scene samples, re-indexed into each fragment; pairs whose noisy
  // positions drifted beyond the tolerance are dropped.
  std::unordered_map<int, Index> rank2;
  for (std::size_t j = 0; j < idx2.size(); ++j)
    rank2.emplace(idx2[j], static_cast<Index>(j));
  for (std::size_t i = 0; i < idx1.size(); ++i) {
    const auto it = rank2.find(idx1[i]);
    if (it == rank2.end()) continue;
    const Vec3 p = pair.first.points.row(static_cast<Index>(i));
    const Vec3 q = pair.second.points.row(it->second);
    if ((pair.rotation * p + pair.translation - q).norm() <= pair.tolerance)
      pair.correspondences.push_back(
          {static_cast<Index>(i), it->second});
  }
  pair.overlap_ratio =
      static_cast<Real>(pair.correspondences.size()) /
      static_cast<Real>(std::min(idx1.size(), idx2.size()));
  if (!config.full_overlap) achieved = pair.overlap_ratio;
  if (pair.correspondences.empty())
    throw InvalidInput("gen_rigid_fragment_pair: no correspondences survived");
  return pair;
}

// ---------------------------------------------------------------------------
// Deformable pairs
// ---------------------------------------------------------------------------

namespace {

struct SphereBump {
  Vec3 center;  // unit direction
  Real width;   // radians
  Real amp;
  Vec3 drift_axis;
};

struct TubeBump {
  Real z;       // along axis, in [-0.5, 0.5] of length
  Real theta;   // around axis
  Real wz, wt;
  Real amp;
};

geom::TriMesh build_bumpy_sphere(int subdivisions,
                                 const std::vector<SphereBump>& bumps,
                                 Real drift, Real amp_jitter) {
  geom::TriMesh mesh = icosphere(subdivisions, 0.5);
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    const Vec3 dir = Vec3(mesh.vertices.row(v)).normalized();
    Real scale = 1.0;
    for (const auto& bump : bumps) {
      Vec3 c = bump.center;
      if (drift != 0.0) {
        const Eigen::AngleAxisd rot(drift, bump.drift_axis);
        c = rot * c;
      }
      const Real angle = std::acos(std::clamp(dir.dot(c), -1.0, 1.0));
      scale += bump.amp * (1.0 + amp_jitter) *
               std::exp(-(angle * angle) / (bump.width * bump.width));
    }
    mesh.vertices.row(v) *= scale;
  }
  return mesh;
}

Real angle_diff(Real a, Real b) {
  Real d = std::fmod(a - b + 3.0 * kPi, 2.0 * kPi) - kPi;
  return d;
}

geom::TriMesh build_worm(int rings, int segments,
                         const std::vector<TubeBump>& bumps, Real bend_angle,
                         Real twist) {
  const Real length = 1.2;
  const Real radius = 0.16;
  geom::TriMesh mesh = tube_mesh(rings, segments, length, radius);
  // Radial bump field in (z, theta), damped toward the caps.
  for (Index v = 0; v < mesh.n_vertices(); ++v) {
    Vec3 p = mesh.vertices.row(v);
    const Real rho = std::hypot(p.x(), p.y());
    if (rho < 1e-9) continue;  // cap centers
    const Real theta = std::atan2(p.y(), p.x());
    const Real zn = p.z() / length;  // in [-0.5, 0.5]
    const Real damp = std::exp(-std::pow(zn / 0.45, 8.0));
    Real scale = 1.0;
    for (const auto& bump : bumps) {
      const Real dz = (zn - bump.z) / bump.wz;
      const Real dt = angle_diff(theta, bump.theta) / bump.wt;
      scale += bump.amp * damp * std::exp(-dz * dz - dt * dt);
    }
    p.x() *= scale;
    p.y() *= scale;
    mesh.vertices.row(v) = p;
  }
  if (bend_angle > 1e-9 || std::abs(twist) > 1e-12) {
    for (Index v = 0; v < mesh.n_vertices(); ++v) {
      Vec3 p = mesh.vertices.row(v);
      const Real s = p.z() + length / 2;  // arc length from the bottom cap
      Real x = p.x(), y = p.y();
      if (std::abs(twist) > 1e-12) {
        const Real a = twist * (s / length);
        const Real cx = std::cos(a) * x - std::sin(a) * y;
        y = std::sin(a) * x + std::cos(a) * y;
        x = cx;
      }
      if (bend_angle > 1e-9) {
        // Map the straight axis onto a circular arc of the same length;
        // cross-sections ride rigidly on the rotating frame.
        const Real rc = length / bend_angle;
        const Real a = s / rc;
        const Vec3 center(rc * (1.0 - std::cos(a)), 0.0,
                          rc * std::sin(a) - length / 2);
        const Vec3 normal(std::cos(a), 0.0, -std::sin(a));
        const Vec3 binormal(0.0, 1.0, 0.0);
        mesh.vertices.row(v) = center + x * normal + y * binormal;
      } else {
        mesh.vertices.row(v) = Vec3(x, y, p.z());
      }
    }
  }
  return mesh;
}

Real max_edge_distortion(const geom::TriMesh& a, const geom::TriMesh& b) {
  Real worst = 0.0;
  for (const auto& e : geom::mesh_edges(a)) {
    const Real la = (a.vertices.row(e[0]) - a.vertices.row(e[1])).norm();
    const Real lb = (b.vertices.row(e[0]) - b.vertices.row(e[1])).norm();
    if (la > 0.0) worst = std::max(worst, std::abs(lb - la) / la);
  }
  return worst;
}

}  // namespace

DeformablePair gen_deformable_pair(const DeformableConfig& config,
                                   std::uint64_t seed) {
  if (config.shape != "sphere" && config.shape != "worm")
    throw InvalidInput("gen_deformable_pair: shape must be sphere or worm");
  if (config.n_bumps < 1 || config.n_bumps > 64)
    throw InvalidInput("gen_deformable_pair: n_bumps out of range");
  if (!(config.max_edge_distortion > 0.0))
    throw InvalidInput("gen_deformable_pair: distortion bound must be > 0");

  Rng rng(seed);
  DeformablePair out;
  out.amplitude_reduced = false;

  if (config.shape == "sphere") {
    std::vector<SphereBump> bumps;
    for (int i = 0; i < config.n_bumps; ++i) {
      SphereBump bump;
      bump.center = rng.normal3().normalized();
      bump.width = rng.uniform(0.25, 0.55);
      bump.amp = config.bump_amplitude * rng.uniform(0.5, 1.0) *
                 (rng.uniform() < 0.75 ? 1.0 : -0.6);
      Vec3 axis = rng.normal3();
      axis -= axis.dot(bump.center) * bump.center;
      bump.drift_axis =
          axis.norm() > 1e-9 ? Vec3(axis.normalized()) : Vec3(0, 0, 1);
      bumps.push_back(bump);
    }
    out.first =
        geom::normalize_unit_area(build_bumpy_sphere(config.subdivisions,
                                                     bumps, 0.0, 0.0));
    const Mat3 rigid = rng.random_rotation();
    const Real jitter = rng.uniform(-0.3, 0.3);
    Real amp = config.deform_amplitude;
    for (int iter = 0;; ++iter) {
      geom::TriMesh second = build_bumpy_sphere(
          config.subdivisions, bumps, 0.35 * amp, jitter * amp);
      second.vertices = (rigid * second.vertices.transpose()).transpose();
      second = geom::normalize_unit_area(second);
      const Real distortion = max_edge_distortion(out.first, second);
      if (distortion <= config.max_edge_distortion || iter >= 24) {
        out.second = std::move(second);
        out.edge_distortion = distortion;
        out.applied_amplitude = amp;
        break;
      }
      amp *= 0.7;
      out.amplitude_reduced = true;
    }
  } else {
    std::vector<TubeBump> bumps;
    for (int i = 0; i < config.n_bumps; ++i) {
      TubeBump bump;
      bump.z = rng.uniform(-0.38, 0.38);
      bump.theta = rng.uniform(-kPi, kPi);
      bump.wz = rng.uniform(0.08, 0.2);
      bump.wt = rng.uniform(0.5, 1.1);
      bump.amp = config.bump_amplitude * rng.uniform(0.5, 1.0);
      bumps.push_back(bump);
    }
    out.first = geom::normalize_unit_area(
        build_worm(config.rings, config.segments, bumps, 0.0, 0.0));
    const Real twist_share = rng.uniform(0.2, 0.5);
    Real amp = config.deform_amplitude;
    for (int iter = 0;; ++iter) {
      geom::TriMesh second =
          build_worm(config.rings, config.segments, bumps, amp,
                     twist_share * amp);
      second = geom::normalize_unit_area(second);
      const Real distortion = max_edge_distortion(out.first, second);
      if (distortion <= config.max_edge_distortion || iter >= 24) {
        out.second = std::move(second);
        out.edge_distortion = distortion;
        out.applied_amplitude = amp;
        break;
      }
      amp *= 0.7;
      out.amplitude_reduced = true;
    }
  }
  return out;
}

}  // namespace voxdesc::data
