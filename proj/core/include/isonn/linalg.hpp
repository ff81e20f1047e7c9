// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace isonn {

// Largest kernel side for which exhaustive permutation matching is allowed.
inline constexpr std::size_t kDefaultMaxBruteK = 8;

/// Dense row-major matrix of doubles. Small by assumption (kernels and
/// adjacency windows); no expression templates, no aliasing tricks.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return entries_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return entries_[r * cols_ + c];
  }

  std::span<double> data() noexcept { return entries_; }
  std::span<const double> data() const noexcept { return entries_; }
  const std::vector<double>& entries() const noexcept { return entries_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> entries_;
};

/// A bijection on {0, ..., k-1}, stored as mapping[a] = pi(a). The induced
/// matrix P has P(a, pi(a)) = 1; it is never materialized.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> mapping);

  static Permutation identity(std::size_t k);

  std::size_t size() const noexcept { return mapping_.size(); }
  std::size_t operator[](std::size_t a) const noexcept { return mapping_[a]; }
  const std::vector<std::size_t>& mapping() const noexcept { return mapping_; }

  Permutation inverse() const;
  DenseMatrix to_matrix() const;

  bool operator==(const Permutation&) const = default;

 private:
  std::vector<std::size_t> mapping_;
};

struct EigenDecomposition {
  DenseMatrix u;               // column j is the eigenvector of lambda[j]
  std::vector<double> lambda;  // descending
  double gap = 0.0;            // min adjacent difference; +inf when k == 1
};

double frobenius_sq(const DenseMatrix& a, const DenseMatrix& b);

// result(a, b) = k_mat(pi(a), pi(b)), i.e. P K P^T for the induced P.
DenseMatrix permute_conjugate(const Permutation& p, const DenseMatrix& k_mat);

/// All k! permutations of {0..k-1} in lexicographic order of their mapping.
/// Index j of the result is the permutation index used throughout the
/// feature tensors. Throws kCapacity when k > max_brute_k and kDomain for
/// k == 0.
std::vector<Permutation> enumerate_permutations(
    std::size_t k, std::size_t max_brute_k = kDefaultMaxBruteK);

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Eigenvalues come back sorted descending with the eigenvector columns
/// permuted to match, and every eigenvector's sign is fixed so that its
/// largest-magnitude entry is positive (the first one on ties). Input must be
/// symmetric to within 1e-9 in Frobenius norm; callers symmetrize first.
/// Throws NumericalError if the off-diagonal mass does not drop under the
/// convergence threshold within 100 sweeps.
EigenDecomposition symmetric_eigendecomposition(const DenseMatrix& a);

DenseMatrix abs_entrywise(const DenseMatrix& a);

DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix symmetrize(const DenseMatrix& a);  // (A + A^T) / 2
double trace(const DenseMatrix& a);
bool all_finite(const DenseMatrix& a) noexcept;

}  // namespace isonn
