// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/geom/operators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "voxdesc/error.hpp"

namespace voxdesc::geom {

SparseMat cotan_stiffness(const TriMesh& mesh) {
  validate(mesh);
  const Index n = mesh.n_vertices();
  std::vector<Eigen::Triplet<Real>> trips;
  trips.reserve(static_cast<std::size_t>(mesh.faces.rows()) * 12);
  for (Index f = 0; f < mesh.faces.rows(); ++f) {
    const int idx[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    const Vec3 p[3] = {mesh.vertices.row(idx[0]), mesh.vertices.row(idx[1]),
                       mesh.vertices.row(idx[2])};
    const Real double_area = (p[1] - p[0]).cross(p[2] - p[0]).norm();
    if (!(double_area > 1e-14))
      throw InvalidInput("cotan_stiffness: face " + std::to_string(f) +
                         " has zero area");
    for (int corner = 0; corner < 3; ++corner) {
      // Edge opposite `corner` gets half the cotangent at `corner`;
      // cot = dot / ||cross|| and the cross norm is shared by all corners.
      const Vec3 e1 = p[(corner + 1) % 3] - p[corner];
      const Vec3 e2 = p[(corner + 2) % 3] - p[corner];
      const Real w = 0.5 * e1.dot(e2) / double_area;
      const int i = idx[(corner + 1) % 3];
      const int j = idx[(corner + 2) % 3];
      trips.emplace_back(i, j, -w);
      trips.emplace_back(j, i, -w);
      trips.emplace_back(i, i, w);
      trips.emplace_back(j, j, w);
    }
  }
  SparseMat stiffness(n, n);
  stiffness.setFromTriplets(trips.begin(), trips.end());
  return stiffness;
}

VecX lumped_mass(const TriMesh& mesh) {
  validate(mesh);
  const VecX areas = face_areas(mesh);
  VecX mass = VecX::Zero(mesh.n_vertices());
  for (Index f = 0; f < mesh.faces.rows(); ++f)
    for (int c = 0; c < 3; ++c) mass(mesh.faces(f, c)) += areas(f) / 3.0;
  if ((mass.array() <= 0.0).any())
    throw InvalidInput("lumped_mass: isolated vertex with zero mass");
  return mass;
}

SpectralBasis spectral_basis(const TriMesh& mesh, int k) {
  if (k <= 0) throw InvalidInput("spectral_basis: k must be positive");
  if (k > mesh.n_vertices())
    throw InvalidInput("spectral_basis: k exceeds vertex count");
  const SparseMat stiffness = cotan_stiffness(mesh);
  const VecX mass = lumped_mass(mesh);

  // Symmetrized dense operator M^{-1/2} W M^{-1/2}; fine at desk scale.
  const VecX inv_sqrt_mass = mass.array().rsqrt();
  MatX sym = MatX(stiffness);
  sym.array().colwise() *= inv_sqrt_mass.array();
  sym.array().rowwise() *= inv_sqrt_mass.transpose().array();
  sym = 0.5 * (sym + sym.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<MatX> solver(sym);
  if (solver.info() != Eigen::Success)
    throw NumericError("spectral_basis: eigensolver failed to converge");

  SpectralBasis basis;
  basis.lambda = solver.eigenvalues().head(k);
  basis.phi = solver.eigenvectors().leftCols(k);
  basis.phi.array().colwise() *= inv_sqrt_mass.array();
  basis.mass = mass;
  // Fix sign: first nonzero-magnitude entry of each column positive.
  for (int c = 0; c < k; ++c) {
    for (Index r = 0; r < basis.phi.rows(); ++r) {
      if (std::abs(basis.phi(r, c)) > 1e-12) {
        if (basis.phi(r, c) < 0.0) basis.phi.col(c) *= -1.0;
        break;
      }
    }
  }
  return basis;
}

}  // namespace voxdesc::geom
