// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "voxdesc/data/synthetic.hpp"
#include "voxdesc/geom/geodesic.hpp"
#include "voxdesc/geom/knn.hpp"
#include "voxdesc/geom/mesh.hpp"
#include "voxdesc/geom/operators.hpp"
#include "voxdesc/rng.hpp"

using namespace voxdesc;
using geom::TriMesh;

namespace {

TriMesh unit_equilateral() {
  TriMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0.5, std::sqrt(3.0) / 2.0, 0;
  mesh.faces.resize(1, 3);
  mesh.faces << 0, 1, 2;
  return mesh;
}

// Independent quadratic-form Dirichlet oracle: sum over faces of
// |grad f|^2 * area, assembled without the cotan shortcut.
Real dirichlet_oracle(const TriMesh& mesh, const VecX& f) {
  Real energy = 0.0;
  for (Index t = 0; t < mesh.faces.rows(); ++t) {
    const Vec3 a = mesh.vertices.row(mesh.faces(t, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(t, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(t, 2));
    const Vec3 n = (b - a).cross(c - a);
    const Real area2 = n.norm();
    // Per-face gradient of a linear function from edge rotations.
    const Vec3 grad = (f(mesh.faces(t, 0)) * (c - b).cross(n) +
                       f(mesh.faces(t, 1)) * (a - c).cross(n) +
                       f(mesh.faces(t, 2)) * (b - a).cross(n)) /
                      (area2 * area2);
    energy += grad.squaredNorm() * (0.5 * area2);
  }
  return energy;
}

}  // namespace

TEST_CASE("cotan stiffness on the unit equilateral triangle") {
  const TriMesh mesh = unit_equilateral();
  const SparseMat w = geom::cotan_stiffness(mesh);
  const MatX dense = MatX(w);
  const Real off = -1.0 / (2.0 * std::sqrt(3.0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j)
        CHECK(dense(i, j) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
      else
        CHECK(dense(i, j) == doctest::Approx(off).epsilon(1e-12));
    }
  CHECK((dense - dense.transpose()).norm() < 1e-14);
  CHECK(dense.rowwise().sum().norm() < 1e-14);
}

TEST_CASE("cotan stiffness matches the per-face gradient oracle") {
  Rng rng(17);
  const TriMesh mesh = data::icosphere(2, 1.0);
  const SparseMat w = geom::cotan_stiffness(mesh);
  for (int trial = 0; trial < 20; ++trial) {
    VecX f(mesh.n_vertices());
    for (Index i = 0; i < f.size(); ++i) f(i) = rng.normal();
    const Real quadratic = f.dot(w * f);
    const Real oracle = dirichlet_oracle(mesh, f);
    CHECK(quadratic == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("cotan stiffness rejects zero-area faces") {
  TriMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 2, 0, 0;  // collinear
  mesh.faces.resize(1, 3);
  mesh.faces << 0, 1, 2;
  CHECK_THROWS_AS(geom::cotan_stiffness(mesh), InvalidInput);
}

TEST_CASE("mesh validation rejects bad faces") {
  TriMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices.setZero();
  mesh.faces.resize(1, 3);
  mesh.faces << 0, 1, 5;
  CHECK_THROWS_AS(geom::validate(mesh), InvalidInput);
  mesh.faces << 0, 1, 1;
  CHECK_THROWS_AS(geom::validate(mesh), InvalidInput);
}

TEST_CASE("lumped mass sums to the surface area") {
  const TriMesh mesh = data::icosphere(2, 1.3);
  const VecX mass = geom::lumped_mass(mesh);
  CHECK(mass.sum() == doctest::Approx(geom::total_area(mesh)).epsilon(1e-12));
  CHECK((mass.array() > 0.0).all());
}

TEST_CASE("spectral basis: flat first mode, ascending eigenvalues, "
          "mass-orthonormal") {
  const TriMesh mesh = geom::normalize_unit_area(data::icosphere(2, 1.0));
  const auto basis = geom::spectral_basis(mesh, 12);
  CHECK(std::abs(basis.lambda(0)) < 1e-8);
  for (int i = 1; i < 12; ++i) CHECK(basis.lambda(i) >= basis.lambda(i - 1));
  const VecX first = basis.phi.col(0);
  CHECK((first.array() - first.mean()).abs().maxCoeff() < 1e-6);
  const MatX gram =
      basis.phi.transpose() * basis.mass.asDiagonal() * basis.phi;
  CHECK((gram - MatX::Identity(12, 12)).norm() < 1e-8);
}

TEST_CASE("sphere spectrum shows the 1/3/5 multiplicity pattern") {
  const TriMesh mesh = data::icosphere(3, 1.0);
  const auto basis = geom::spectral_basis(mesh, 9);
  // Groups: {0}, {1..3}, {4..8}; each tight, groups well separated.
  const Real g1 = basis.lambda.segment(1, 3).mean();
  const Real g2 = basis.lambda.segment(4, 5).mean();
  for (int i = 1; i <= 3; ++i)
    CHECK(std::abs(basis.lambda(i) - g1) < 0.05 * g1);
  for (int i = 4; i <= 8; ++i)
    CHECK(std::abs(basis.lambda(i) - g2) < 0.05 * g2);
  CHECK(g2 > 2.0 * g1);
  // Ideal continuum values are l(l+1); the discretization sits close.
  CHECK(g1 == doctest::Approx(2.0).epsilon(0.05));
  CHECK(g2 == doctest::Approx(6.0).epsilon(0.05));
}

TEST_CASE("geodesic distance across a single edge is its length") {
  const TriMesh mesh = unit_equilateral();
  const VecX dist = geom::geodesic_distances(mesh, 0);
  CHECK(dist(0) == 0.0);
  CHECK(dist(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dist(2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("icosphere antipodal geodesic approximates pi") {
  const TriMesh mesh = data::icosphere(4, 1.0);
  // Vertices 0 and 3 of the base icosahedron are antipodal and survive
  // subdivision with their original indices.
  const Vec3 a = mesh.vertices.row(0);
  const Vec3 b = mesh.vertices.row(3);
  CHECK((a + b).norm() < 1e-12);
  const VecX dist = geom::geodesic_distances(mesh, 0);
  const Real pi = std::numbers::pi_v<Real>;
  CHECK(dist(3) > 0.92 * pi);
  CHECK(dist(3) < 1.08 * pi);
}

TEST_CASE("geodesic distances satisfy the triangle inequality on samples") {
  const TriMesh mesh = data::icosphere(2, 1.0);
  Rng rng(23);
  const Index n = mesh.n_vertices();
  std::vector<VecX> rows;
  std::vector<int> sources;
  geom::GeodesicGraph graph(mesh);
  for (int i = 0; i < 6; ++i) {
    sources.push_back(static_cast<int>(rng.uniform_int(n)));
    rows.push_back(graph.distances(sources.back()));
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      for (int trial = 0; trial < 50; ++trial) {
        const Index via = rng.uniform_int(n);
        CHECK(rows[static_cast<std::size_t>(i)](sources[static_cast<std::size_t>(j)]) <=
              rows[static_cast<std::size_t>(i)](via) +
                  rows[static_cast<std::size_t>(j)](via) + 1e-8);
      }
    }
}

TEST_CASE("knn matches a naive scan, including duplicate points") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = 30 + rng.uniform_int(40);
    const Index m = 1 + rng.uniform_int(20);
    const int dim = trial % 2 == 0 ? 3 : 8;
    MatX points(n, dim), queries(m, dim);
    for (Index i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) points(i, d) = rng.uniform(-1, 1);
    // Force duplicates.
    points.row(n - 1) = points.row(0);
    points.row(n - 2) = points.row(1);
    for (Index i = 0; i < m; ++i)
      for (int d = 0; d < dim; ++d) queries(i, d) = rng.uniform(-1, 1);
    queries.row(0) = points.row(5);  // exact hit
    const int k = 1 + static_cast<int>(rng.uniform_int(5));

    const Eigen::MatrixXi fast = geom::nearest_neighbors(points, queries, k);
    for (Index q = 0; q < m; ++q) {
      // Oracle: full sort by (distance, index).
      std::vector<std::pair<Real, int>> all;
      for (Index i = 0; i < n; ++i)
        all.push_back({(points.row(i) - queries.row(q)).squaredNorm(),
                       static_cast<int>(i)});
      std::sort(all.begin(), all.end());
      for (int j = 0; j < k; ++j)
        CHECK(fast(q, j) == all[static_cast<std::size_t>(j)].second);
    }
  }
}

TEST_CASE("knn with k=1 on the data itself returns the identity") {
  Rng rng(37);
  MatX points(50, 3);
  for (Index i = 0; i < 50; ++i)
    for (int d = 0; d < 3; ++d) points(i, d) = rng.uniform(-1, 1);
  const IndexVec nn = geom::nearest_neighbor(points, points);
  for (Index i = 0; i < 50; ++i) CHECK(nn(i) == i);
}

TEST_CASE("uniform grid radius search matches brute force") {
  Rng rng(41);
  Points points(400, 3);
  for (Index i = 0; i < points.rows(); ++i)
    for (int d = 0; d < 3; ++d) points(i, d) = rng.uniform(-1, 1);
  const geom::UniformGrid grid(points, 0.25);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 center(rng.uniform(-1, 1), rng.uniform(-1, 1),
                      rng.uniform(-1, 1));
    const Real radius = rng.uniform(0.05, 0.8);
    const auto got = grid.radius_search(center, radius);
    std::vector<int> want;
    for (Index i = 0; i < points.rows(); ++i)
      if ((Vec3(points.row(i)) - center).norm() <= radius)
        want.push_back(static_cast<int>(i));
    CHECK(got == want);
  }
}

TEST_CASE("normalize_unit_area centers and rescales") {
  const TriMesh mesh = data::icosphere(2, 2.7);
  TriMesh shifted = mesh;
  shifted.vertices.rowwise() += Eigen::RowVector3d(0.3, -1.2, 5.0);
  const TriMesh normalized = geom::normalize_unit_area(shifted);
  CHECK(std::abs(geom::total_area(normalized) - 1.0) < 1e-9);
  CHECK(geom::area_centroid(normalized).norm() < 1e-9);
}

TEST_CASE("normalize_unit_diagonal gives a unit bounding box diagonal") {
  Rng rng(43);
  geom::PointCloud cloud;
  cloud.points.resize(100, 3);
  for (Index i = 0; i < 100; ++i)
    for (int d = 0; d < 3; ++d) cloud.points(i, d) = rng.uniform(-4, 9);
  const auto normalized = geom::normalize_unit_diagonal(cloud);
  CHECK(geom::bounding_box_diagonal(normalized.points) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mesh_edges returns each undirected edge once") {
  const TriMesh mesh = data::icosphere(1, 1.0);
  const auto edges = geom::mesh_edges(mesh);
  // Closed triangle mesh: E = 3F/2.
  CHECK(edges.size() == static_cast<std::size_t>(mesh.n_faces() * 3 / 2));
  for (const auto& e : edges) CHECK(e[0] < e[1]);
}
