// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

// Seeded random inputs for property-style tests.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "isonn/linalg.hpp"

namespace isonn::testing {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                 double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = d(rng);
  return m;
}

inline DenseMatrix random_symmetric(std::size_t k, std::mt19937_64& rng) {
  DenseMatrix m = random_matrix(k, k, rng);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);
  }
  return m;
}

inline DenseMatrix random_adjacency(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(p);
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge(rng)) a(i, j) = a(j, i) = 1.0;
    }
  }
  return a;
}

inline Permutation random_permutation(std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> m(k);
  std::iota(m.begin(), m.end(), std::size_t{0});
  std::shuffle(m.begin(), m.end(), rng);
  return Permutation(std::move(m));
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace isonn::testing
