// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/match/fmap.hpp"

#include <cmath>
#include <string>

#include "voxdesc/error.hpp"
#include "voxdesc/geom/knn.hpp"

namespace voxdesc::match {

FunctionalMap fmap_from_p2p(const PointToPointMap& map21,
                            const geom::SpectralBasis& basis1,
                            const geom::SpectralBasis& basis2, int k) {
  if (k < 1) throw InvalidInput("fmap_from_p2p: k must be positive");
  if (basis1.phi.cols() < k || basis2.phi.cols() < k)
    throw InvalidInput("fmap_from_p2p: bases have fewer than k columns");
  if (map21.size() != basis2.phi.rows())
    throw InvalidInput("fmap_from_p2p: map size does not match basis2");

  const Index kept = map21.valid_count();
  if (kept < k)
    throw NumericError("fmap_from_p2p: only " + std::to_string(kept) +
                       " kept rows for a " + std::to_string(k) +
                       "-column fit");
  const bool partial = !map21.valid.empty();

  MatX a(kept, k), b(kept, k);
  Index r = 0;
  for (Index y = 0; y < map21.size(); ++y) {
    if (!map21.is_valid(y)) continue;
    const Index x = map21.targets(y);
    if (x < 0 || x >= basis1.phi.rows())
      throw InvalidInput("fmap_from_p2p: map target out of range");
    const Real w = std::sqrt(partial ? Real(1) : basis2.mass(y));
    a.row(r) = w * basis2.phi.row(y).head(k);
    b.row(r) = w * basis1.phi.row(x).head(k);
    ++r;
  }

  Eigen::ColPivHouseholderQR<MatX> qr(a);
  if (qr.rank() < k)
    throw NumericError("fmap_from_p2p: rank-deficient fit (rank " +
                       std::to_string(qr.rank()) + " of " +
                       std::to_string(k) + ")");
  // min_X |A X - B| already yields X with X a1 ~ a2: for a full map with
  // mass weights it reduces to phi2^T M2 phi1[T].
  FunctionalMap out;
  out.c = qr.solve(b);
  return out;
}

PointToPointMap p2p_from_fmap(const FunctionalMap& c,
                              const geom::SpectralBasis& basis1,
                              const geom::SpectralBasis& basis2) {
  const Index k1 = c.c.cols();
  const Index k2 = c.c.rows();
  if (k1 < 1 || k2 < 1) throw InvalidInput("p2p_from_fmap: empty map");
  if (basis1.phi.cols() < k1 || basis2.phi.cols() < k2)
    throw InvalidInput("p2p_from_fmap: bases too narrow for the map");
  const MatX embedded = basis1.phi.leftCols(k1) * c.c.transpose();
  PointToPointMap out;
  out.targets = geom::nearest_neighbor(basis2.phi.leftCols(k2), embedded);
  return out;
}

PointToPointMap zoomout(const FunctionalMap& c_init,
                        const geom::SpectralBasis& basis1,
                        const geom::SpectralBasis& basis2, int k_start,
                        int k_end, int step) {
  if (k_start < 1 || k_end < k_start)
    throw InvalidInput("zoomout: need 1 <= k_start <= k_end");
  if (c_init.c.rows() != k_start || c_init.c.cols() != k_start)
    throw InvalidInput("zoomout: initial map is not k_start-sized");
  if (basis1.phi.cols() < k_end || basis2.phi.cols() < k_end)
    throw InvalidInput("zoomout: bases have fewer than k_end columns");
  if (step == 0 && k_end != k_start)
    throw InvalidInput("zoomout: zero step with k_end > k_start");
  if (step < 0 || (step > 0 && (k_end - k_start) % step != 0))
    throw InvalidInput("zoomout: growth must divide evenly into steps");

  FunctionalMap c = c_init;
  for (int k = k_start; k < k_end; k += step) {
    // Spatial step with the roles swapped: per vertex of shape 2, the
    // nearest row of phi1 from phi2.row(y) * C, i.e. the pullback map the
    // spectral refit consumes.
    FunctionalMap flipped;
    flipped.c = c.c.transpose();
    const PointToPointMap map21 = p2p_from_fmap(flipped, basis2, basis1);
    c = fmap_from_p2p(map21, basis1, basis2, k + step);
  }
  return p2p_from_fmap(c, basis1, basis2);
}

FunctionalMap fmap_from_features(const MatX& f1, const MatX& f2,
                                 const geom::SpectralBasis& basis1,
                                 const geom::SpectralBasis& basis2, int k) {
  if (k < 1) throw InvalidInput("fmap_from_features: k must be positive");
  if (basis1.phi.cols() < k || basis2.phi.cols() < k)
    throw InvalidInput("fmap_from_features: bases have fewer than k columns");
  if (f1.rows() != basis1.phi.rows() || f2.rows() != basis2.phi.rows())
    throw InvalidInput("fmap_from_features: feature rows do not match bases");
  if (f1.cols() != f2.cols())
    throw InvalidInput("fmap_from_features: channel counts disagree");
  if (f1.cols() < k)
    throw InvalidInput("fmap_from_features: underdetermined, fewer than k "
                       "feature channels");

  const MatX a1 = basis1.phi.leftCols(k).transpose() *
                  (basis1.mass.asDiagonal() * f1);
  const MatX a2 = basis2.phi.leftCols(k).transpose() *
                  (basis2.mass.asDiagonal() * f2);

  Eigen::ColPivHouseholderQR<MatX> qr(a1.transpose());
  if (qr.rank() < k)
    throw NumericError(
        "fmap_from_features: feature coefficients are rank deficient");
  FunctionalMap out;
  out.c = qr.solve(a2.transpose()).transpose();
  return out;
}

Real fmap_l2(const FunctionalMap& pred, const FunctionalMap& truth) {
  if (pred.c.rows() != truth.c.rows() || pred.c.cols() != truth.c.cols())
    throw InvalidInput("fmap_l2: map sizes disagree");
  return (pred.c - truth.c).squaredNorm();
}

}  // namespace voxdesc::match
