// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#include "voxdesc/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "voxdesc/error.hpp"

namespace voxdesc::eval {
namespace {

constexpr int kCurveSamples = 100;
constexpr Real kCurveMax = 0.25;

}  // namespace

ErrorReport geodesic_error(const match::PointToPointMap& pred,
                           const match::PointToPointMap& gt,
                           const geom::TriMesh& target_mesh) {
  const Index n = pred.size();
  if (n < 1) throw InvalidInput("geodesic_error: empty prediction");
  if (gt.size() != n)
    throw InvalidInput("geodesic_error: map sizes disagree");
  const Index nt = target_mesh.n_vertices();

  // One Dijkstra per distinct ground-truth target serves every source vertex
  // mapped there.
  std::map<Index, std::vector<Index>> by_target;
  for (Index i = 0; i < n; ++i) {
    if (!pred.is_valid(i) || !gt.is_valid(i)) continue;
    const Index p = pred.targets(static_cast<int>(i));
    const Index g = gt.targets(static_cast<int>(i));
    if (p < 0 || p >= nt || g < 0 || g >= nt)
      throw InvalidInput("geodesic_error: target index out of range");
    by_target[g].push_back(i);
  }
  if (by_target.empty())
    throw InvalidInput("geodesic_error: no vertex survives both masks");

  ErrorReport out;
  out.errors = VecX::Constant(n, -1.0);
  const geom::GeodesicGraph graph(target_mesh);
  std::vector<Real> valid;
  for (const auto& [g, sources] : by_target) {
    const VecX dist = graph.distances(static_cast<int>(g));
    for (const Index i : sources) {
      const Real e = dist(pred.targets(static_cast<int>(i)));
      if (!std::isfinite(e))
        throw NumericError("geodesic_error: disconnected target mesh (vertex " +
                           std::to_string(g) + ")");
      out.errors(static_cast<int>(i)) = e;
      valid.push_back(e);
    }
  }

  std::sort(valid.begin(), valid.end());
  const Real count = static_cast<Real>(valid.size());
  out.mean = 0.0;
  for (const Real e : valid) out.mean += e;
  out.mean /= count;

  const Real max_err = valid.back();
  const bool overflow = max_err > kCurveMax;
  out.curve.resize(kCurveSamples + (overflow ? 1 : 0), 2);
  for (int i = 0; i < kCurveSamples; ++i) {
    const Real t = kCurveMax * static_cast<Real>(i) /
                   static_cast<Real>(kCurveSamples - 1);
    const auto hit = std::upper_bound(valid.begin(), valid.end(), t);
    out.curve(i, 0) = t;
    out.curve(i, 1) =
        static_cast<Real>(std::distance(valid.begin(), hit)) / count;
  }
  if (overflow) {
    out.curve(kCurveSamples, 0) = max_err;
    out.curve(kCurveSamples, 1) = 1.0;
  }
  return out;
}

Real dirichlet_energy(const MatX& features, const SparseMat& stiffness) {
  if (features.rows() != stiffness.rows() ||
      stiffness.rows() != stiffness.cols())
    throw InvalidInput("dirichlet_energy: feature rows do not match the mesh");
  if (features.cols() < 1)
    throw InvalidInput("dirichlet_energy: no feature channels");
  return (features.array() * (stiffness * features).array()).sum() /
         static_cast<Real>(features.cols());
}

PcaReport patch_pca(const MatX& grids, int n_components) {
  const Index d = grids.rows();
  const Index n = grids.cols();
  if (n < 2) throw InvalidInput("patch_pca: need at least 2 grids");
  const Index max_rank = std::min(d, n - 1);
  if (n_components < 1 || n_components > max_rank)
    throw InvalidInput("patch_pca: component count out of range");

  const VecX mu = grids.rowwise().mean();
  const MatX xc = grids.colwise() - mu;
  const Real total = xc.squaredNorm();
  if (!(total > 0.0)) throw NumericError("patch_pca: grids have no variance");

  // Spectrum of the smaller Gram matrix; both sides share the nonzero
  // eigenvalues, and the patch-side eigenvectors double as projections.
  VecX evals;
  MatX proj(n, 2);
  if (n <= d) {
    const MatX gram = xc.transpose() * xc;
    const Eigen::SelfAdjointEigenSolver<MatX> es(gram);
    evals = es.eigenvalues().reverse().cwiseMax(0.0);
    for (int k = 0; k < 2; ++k) {
      const Index c = n - 1 - k;
      proj.col(k) = std::sqrt(std::max(es.eigenvalues()(c), Real(0))) *
                    es.eigenvectors().col(c);
    }
  } else {
    const MatX cov = xc * xc.transpose();
    const Eigen::SelfAdjointEigenSolver<MatX> es(cov);
    evals = es.eigenvalues().reverse().cwiseMax(0.0);
    for (int k = 0; k < 2; ++k)
      proj.col(k) = xc.transpose() * es.eigenvectors().col(d - 1 - k);
  }

  PcaReport out;
  out.projection = std::move(proj);
  out.explained = evals.head(n_components) / total;
  out.unexplained.resize(n_components + 1);
  out.unexplained(0) = 1.0;
  for (int c = 0; c < n_components; ++c)
    out.unexplained(c + 1) =
        std::max(out.unexplained(c) - out.explained(c), Real(0));
  return out;
}

int components_to_explain(const PcaReport& report, Real fraction) {
  for (int c = 0; c < report.unexplained.size(); ++c)
    if (1.0 - report.unexplained(c) >= fraction) return c;
  return -1;
}

}  // namespace voxdesc::eval
