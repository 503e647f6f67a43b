// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"
#include "voxdesc/geom/operators.hpp"
#include "voxdesc/match/p2p.hpp"

namespace voxdesc::match {

/// Linear map between truncated spectral bases. Convention throughout: C is
/// k2 x k1 and sends coefficients on shape 1 to shape 2, C a1 ~ a2.
struct FunctionalMap {
  MatX c;
};

/// Fits C to a pullback map `map21` (per vertex of shape 2, its source on
/// shape 1): least squares of phi1 composed with the map onto the first k
/// columns of phi2. Full maps use mass weights, which makes the fit the
/// plain spectral projection; masked maps weight every kept row equally.
/// Throws NumericError when the kept rows leave the fit rank deficient.
FunctionalMap fmap_from_p2p(const PointToPointMap& map21,
                            const geom::SpectralBasis& basis1,
                            const geom::SpectralBasis& basis2, int k);

/// Spectral-to-spatial conversion: vertex x of shape 1 goes to the nearest
/// row of phi2 from the embedded row phi1.row(x) * C^T. An all-zero C maps
/// every vertex to the same target (the minimum-norm basis row).
PointToPointMap p2p_from_fmap(const FunctionalMap& c,
                              const geom::SpectralBasis& basis1,
                              const geom::SpectralBasis& basis2);

/// ZoomOut refinement: alternates the spatial conversion with a spectral
/// refit while the basis size grows from k_start to k_end in equal steps,
/// then returns the dense shape-1-to-shape-2 map at k_end. step == 0 asks
/// for no growth (k_end == k_start) and reduces to one conversion of the
/// input map.
PointToPointMap zoomout(const FunctionalMap& c_init,
                        const geom::SpectralBasis& basis1,
                        const geom::SpectralBasis& basis2, int k_start,
                        int k_end, int step);

/// Supervised functional-map utility: projects both feature sets onto their
/// bases (A_i = phi_i^T M_i F_i, first k columns) and solves
/// min_C |C A1 - A2|^2. Throws InvalidInput when the features have fewer
/// than k channels and NumericError when A1 is rank deficient.
FunctionalMap fmap_from_features(const MatX& f1, const MatX& f2,
                                 const geom::SpectralBasis& basis1,
                                 const geom::SpectralBasis& basis2, int k);

/// Squared Frobenius distance between two functional maps of equal size.
Real fmap_l2(const FunctionalMap& pred, const FunctionalMap& truth);

}  // namespace voxdesc::match
