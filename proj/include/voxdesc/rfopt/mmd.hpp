// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxdesc/core.hpp"

namespace voxdesc::rfopt {

struct MmdResult {
  Real value = 0.0;
  MatX dtargets;  // same shape as the target feature matrix
};

/// Squared maximum mean discrepancy between two feature sets under the
/// Gaussian kernel exp(-|x - y|^2 / bandwidth^2), as the biased V-statistic
/// mean k(s,s) - 2 mean k(s,t) + mean k(t,t), with the gradient with respect
/// to the target rows. Zero when both sets hold the same rows; tiny
/// negatives are possible in floating point.
MmdResult mmd(const MatX& source, const MatX& target, Real bandwidth);

/// Median-heuristic kernel width: sqrt of the median squared distance over
/// distinct row pairs. Needs at least two rows and some spread.
Real median_bandwidth(const MatX& features);

}  // namespace voxdesc::rfopt
