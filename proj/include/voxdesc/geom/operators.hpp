// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"
#include "voxdesc/geom/mesh.hpp"

namespace voxdesc::geom {

/// Cotangent stiffness matrix W (positive semidefinite convention:
/// x^T W x is the Dirichlet energy of x). Signed cotangent weights, no
/// clamping. Throws InvalidInput on zero-area faces.
SparseMat cotan_stiffness(const TriMesh& mesh);

/// Lumped (diagonal) mass: one third of the incident face area per vertex.
VecX lumped_mass(const TriMesh& mesh);

struct SpectralBasis {
  MatX phi;     // n_vertices x k, mass-orthonormal: phi^T diag(mass) phi = I
  VecX lambda;  // ascending, lambda(0) ~ 0
  VecX mass;    // lumped mass used for the solve
};

/// First k eigenpairs of W phi = lambda M phi (dense solve via the
/// symmetrized operator M^{-1/2} W M^{-1/2}).
SpectralBasis spectral_basis(const TriMesh& mesh, int k);

}  // namespace voxdesc::geom
