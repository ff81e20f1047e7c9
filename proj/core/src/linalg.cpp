// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "isonn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "isonn/error.hpp"
#include "linalg_kernels.hpp"

namespace isonn {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows * cols) {
    fail(ErrorKind::kDimension,
         "matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
             " given " + std::to_string(entries_.size()) + " entries");
  }
  if (!all_finite(*this)) fail(ErrorKind::kDomain, "matrix has non-finite entries");
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> entries;
  entries.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorKind::kDimension, "ragged matrix rows");
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(entries));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> values) {
  DenseMatrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Permutation::Permutation(std::vector<std::size_t> mapping)
    : mapping_(std::move(mapping)) {
  std::vector<bool> seen(mapping_.size(), false);
  for (std::size_t v : mapping_) {
    if (v >= mapping_.size() || seen[v]) {
      fail(ErrorKind::kDomain, "mapping is not a bijection");
    }
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t k) {
  std::vector<std::size_t> m(k);
  std::iota(m.begin(), m.end(), std::size_t{0});
  return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(mapping_.size());
  for (std::size_t a = 0; a < mapping_.size(); ++a) inv[mapping_[a]] = a;
  return Permutation(std::move(inv));
}

DenseMatrix Permutation::to_matrix() const {
  DenseMatrix p(size(), size());
  for (std::size_t a = 0; a < size(); ++a) p(a, mapping_[a]) = 1.0;
  return p;
}

double frobenius_sq(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::kDimension, "frobenius_sq operands differ in shape");
  }
  double sum = 0.0;
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return sum;
}

DenseMatrix permute_conjugate(const Permutation& p, const DenseMatrix& k_mat) {
  const std::size_t k = p.size();
  if (k_mat.rows() != k || k_mat.cols() != k) {
    fail(ErrorKind::kDimension, "permutation length " + std::to_string(k) +
                                    " does not match matrix " +
                                    std::to_string(k_mat.rows()) + "x" +
                                    std::to_string(k_mat.cols()));
  }
  DenseMatrix out(k, k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) out(a, b) = k_mat(p[a], p[b]);
  }
  return out;
}

std::vector<Permutation> enumerate_permutations(std::size_t k,
                                                std::size_t max_brute_k) {
  if (k == 0) fail(ErrorKind::kDomain, "permutation size must be >= 1");
  if (k > max_brute_k) {
    fail(ErrorKind::kCapacity, "k = " + std::to_string(k) +
                                   " exceeds max_brute_k = " +
                                   std::to_string(max_brute_k));
  }
  std::vector<std::size_t> m(k);
  std::iota(m.begin(), m.end(), std::size_t{0});
  std::vector<Permutation> out;
  do {
    out.emplace_back(m);
  } while (std::next_permutation(m.begin(), m.end()));
  return out;
}

namespace detail {

namespace {

double off_diagonal_norm(const double* a, std::size_t k) {
  double s = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t q = 0; q < k; ++q) {
      if (p != q) s += a[p * k + q] * a[p * k + q];
    }
  }
  return std::sqrt(s);
}

}  // namespace

void eigen_symmetric(std::span<const double> a_in, std::size_t k,
                     std::span<double> work, std::span<double> u,
                     std::span<double> lambda) {
  double* a = work.data();
  std::copy(a_in.begin(), a_in.begin() + k * k, a);
  double* v = u.data();
  std::fill(v, v + k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) v[i * k + i] = 1.0;

  double scale = 0.0;
  for (std::size_t i = 0; i < k * k; ++i) scale += a[i] * a[i];
  // Rounding puts a floor of ~eps*|A| under the off-diagonal mass.
  const double tol = std::max(
      kOffDiagonalTolerance,
      8.0 * std::numeric_limits<double>::epsilon() * std::sqrt(scale));

  double off = off_diagonal_norm(a, k);
  int sweep = 0;
  while (off > tol) {
    if (sweep == kMaxJacobiSweeps) {
      throw NumericalError("Jacobi eigensolver did not converge after " +
                               std::to_string(kMaxJacobiSweeps) +
                               " sweeps (off-diagonal norm " +
                               std::to_string(off) + ")",
                           off);
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = a[p * k + q];
        if (apq == 0.0) continue;
        const double app = a[p * k + p];
        const double aqq = a[q * k + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the (p, q) Givens rotation.
        for (std::size_t r = 0; r < k; ++r) {
          const double arp = a[r * k + p];
          const double arq = a[r * k + q];
          a[r * k + p] = c * arp - s * arq;
          a[r * k + q] = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double apr = a[p * k + r];
          const double aqr = a[q * k + r];
          a[p * k + r] = c * apr - s * aqr;
          a[q * k + r] = s * apr + c * aqr;
        }
        a[p * k + q] = 0.0;
        a[q * k + p] = 0.0;
        for (std::size_t r = 0; r < k; ++r) {
          const double vrp = v[r * k + p];
          const double vrq = v[r * k + q];
          v[r * k + p] = c * vrp - s * vrq;
          v[r * k + q] = s * vrp + c * vrq;
        }
      }
    }
    off = off_diagonal_norm(a, k);
  }

  // Selection sort on columns; k is tiny.
  for (std::size_t i = 0; i < k; ++i) lambda[i] = a[i * k + i];
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t best = i;
    for (std::size_t j = i + 1; j < k; ++j) {
      if (lambda[j] > lambda[best]) best = j;
    }
    if (best != i) {
      std::swap(lambda[i], lambda[best]);
      for (std::size_t r = 0; r < k; ++r) std::swap(v[r * k + i], v[r * k + best]);
    }
  }

  for (std::size_t j = 0; j < k; ++j) {
    double mag = 0.0;
    for (std::size_t r = 0; r < k; ++r) mag = std::max(mag, std::abs(v[r * k + j]));
    // Entries within relative 1e-12 of the maximum count as tied.
    const double cutoff = mag * (1.0 - 1e-12);
    for (std::size_t r = 0; r < k; ++r) {
      const double x = v[r * k + j];
      if (std::abs(x) >= cutoff) {
        if (x < 0.0) {
          for (std::size_t rr = 0; rr < k; ++rr) v[rr * k + j] = -v[rr * k + j];
        }
        break;
      }
    }
  }
}

void matmul(const double* a, const double* b, double* out, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = a[i * k + l];
      for (std::size_t j = 0; j < k; ++j) out[i * k + j] += ail * b[l * k + j];
    }
  }
}

void matmul_bt(const double* a, const double* b, double* out, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[j * k + l];
      out[i * k + j] = s;
    }
  }
}

}  // namespace detail

EigenDecomposition symmetric_eigendecomposition(const DenseMatrix& a) {
  if (!a.is_square()) fail(ErrorKind::kDimension, "eigendecomposition needs a square matrix");
  if (!all_finite(a)) fail(ErrorKind::kDomain, "matrix has non-finite entries");
  const std::size_t k = a.rows();
  double asym = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = a(i, j) - a(j, i);
      asym += d * d;
    }
  }
  if (std::sqrt(asym) > detail::kSymmetryTolerance) {
    fail(ErrorKind::kDomain, "matrix is not symmetric (|A - A^T|_F = " +
                                 std::to_string(std::sqrt(asym)) + ")");
  }

  EigenDecomposition out;
  out.u = DenseMatrix(k, k);
  out.lambda.resize(k);
  std::vector<double> work(k * k);
  detail::eigen_symmetric(a.data(), k, work, out.u.data(), out.lambda);
  out.gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < k; ++j) {
    out.gap = std::min(out.gap, out.lambda[j] - out.lambda[j + 1]);
  }
  return out;
}

DenseMatrix abs_entrywise(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (double& x : out.data()) x = std::abs(x);
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::kDimension, "multiply: inner dimensions differ");
  }
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += ail * b(l, j);
    }
  }
  return out;
}

DenseMatrix symmetrize(const DenseMatrix& a) {
  if (!a.is_square()) fail(ErrorKind::kDimension, "symmetrize needs a square matrix");
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      out(i, j) = 0.5 * (a(i, j) + a(j, i));
    }
  }
  return out;
}

double trace(const DenseMatrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
  return t;
}

bool all_finite(const DenseMatrix& a) noexcept {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace isonn
