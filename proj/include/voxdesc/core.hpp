// Copyright 2026 The voxdesc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>

namespace voxdesc {

using Real = double;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
// Point sets are stored row-major: one point per row.
using Points = Eigen::Matrix<Real, Eigen::Dynamic, 3>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;
using IndexVec = Eigen::VectorXi;
using SparseMat = Eigen::SparseMatrix<Real>;

using Index = std::int64_t;

}  // namespace voxdesc
