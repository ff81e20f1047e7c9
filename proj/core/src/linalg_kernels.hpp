// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

// Allocation-free inner loops shared by the public linalg entry points and
// the per-window matching code.

#pragma once

#include <cstddef>
#include <span>

namespace isonn::detail {

inline constexpr double kSymmetryTolerance = 1e-9;
inline constexpr double kOffDiagonalTolerance = 1e-10;
inline constexpr int kMaxJacobiSweeps = 100;

// Diagonalizes the symmetric k x k row-major matrix `a`. On return `u`
// holds eigenvectors as columns, `lambda` the eigenvalues, both sorted
// descending and sign-canonicalized. `work` needs k*k entries. Throws
// NumericalError on non-convergence.
void eigen_symmetric(std::span<const double> a, std::size_t k,
                     std::span<double> work, std::span<double> u,
                     std::span<double> lambda);

// out = a * b for k x k row-major matrices; out must not alias a or b.
void matmul(const double* a, const double* b, double* out, std::size_t k);

// out = a * b^T.
void matmul_bt(const double* a, const double* b, double* out, std::size_t k);

}  // namespace isonn::detail
