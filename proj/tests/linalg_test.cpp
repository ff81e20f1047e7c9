// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "isonn/error.hpp"
#include "isonn/linalg.hpp"
#include "support/generators.hpp"

namespace isonn {
namespace {

using testing::random_matrix;
using testing::random_symmetric;

double elementwise_sq(const DenseMatrix& a, const DenseMatrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  }
  return s;
}

double factorial(std::size_t k) {
  double f = 1.0;
  for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
  return f;
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no isonn::Error thrown";
  return ErrorKind::kState;
}

TEST(DenseMatrix, ConstructionAndAccess) {
  const auto m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.size(), 6u);
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.entries(), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(DenseMatrix::identity(2), DenseMatrix::from_rows({{1, 0}, {0, 1}}));
  const std::vector<double> d{3, 1};
  EXPECT_EQ(DenseMatrix::diagonal(d), DenseMatrix::from_rows({{3, 0}, {0, 1}}));
}

TEST(DenseMatrix, RejectsBadShapes) {
  EXPECT_EQ(kind_of([] { DenseMatrix(2, 2, std::vector<double>{1, 2, 3}); }), ErrorKind::kDimension);
  EXPECT_EQ(kind_of([] { DenseMatrix::from_rows({{1, 2}, {3}}); }), ErrorKind::kDimension);
  EXPECT_EQ(kind_of([] { DenseMatrix(1, 1, std::vector<double>{std::nan("")}); }),
            ErrorKind::kDomain);
}

TEST(FrobeniusSq, Examples) {
  const auto x = DenseMatrix::from_rows({{1.5, -2}, {0.25, 7}});
  EXPECT_EQ(frobenius_sq(x, x), 0.0);
  EXPECT_EQ(frobenius_sq(DenseMatrix::from_rows({{0, 1}, {1, 0}}), DenseMatrix(2, 2)), 2.0);
  std::mt19937_64 rng(11);
  const auto a = random_matrix(3, 3, rng);
  const auto b = random_matrix(3, 3, rng);
  EXPECT_NEAR(frobenius_sq(a, b), elementwise_sq(a, b), 1e-15);
}

TEST(FrobeniusSq, ShapeMismatch) {
  EXPECT_EQ(kind_of([] { frobenius_sq(DenseMatrix(2, 2), DenseMatrix(2, 3)); }),
            ErrorKind::kDimension);
}

TEST(FrobeniusSq, SymmetricNonNegativeAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 1 + rng() % 5, c = 1 + rng() % 5;
    const auto a = random_matrix(r, c, rng);
    auto b = (trial % 3 == 0) ? a : random_matrix(r, c, rng);
    if (trial % 3 == 1) {
      b = a;
      b.data()[rng() % b.size()] += 1e-300;  // smallest perturbations still register
    }
    const double ab = frobenius_sq(a, b);
    EXPECT_EQ(ab, frobenius_sq(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ab == 0.0, a == b) << "trial " << trial;
  }
}

TEST(Permutation, ValidatesBijection) {
  EXPECT_EQ(kind_of([] { Permutation(std::vector<std::size_t>{0, 0}); }), ErrorKind::kDomain);
  EXPECT_EQ(kind_of([] { Permutation(std::vector<std::size_t>{0, 2}); }), ErrorKind::kDomain);
  const Permutation p(std::vector<std::size_t>{2, 0, 1});
  EXPECT_EQ(p.inverse().mapping(), (std::vector<std::size_t>{1, 2, 0}));
  const auto m = p.to_matrix();
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(m(a, b), b == p[a] ? 1.0 : 0.0);
  }
}

TEST(PermuteConjugate, Examples) {
  const auto k = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(permute_conjugate(Permutation::identity(2), k), k);
  const Permutation swap(std::vector<std::size_t>{1, 0});
  EXPECT_EQ(permute_conjugate(swap, k), DenseMatrix::from_rows({{4, 3}, {2, 1}}));
  std::mt19937_64 rng(3);
  const auto big = random_matrix(5, 5, rng);
  const auto p = testing::random_permutation(5, rng);
  EXPECT_EQ(permute_conjugate(p.inverse(), permute_conjugate(p, big)), big);
}

TEST(PermuteConjugate, MatchesExplicitMatrixProduct) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng() % 6;
    const auto km = random_matrix(k, k, rng);
    const auto p = testing::random_permutation(k, rng);
    const auto pm = p.to_matrix();
    const auto expected = multiply(multiply(pm, km), transpose(pm));
    EXPECT_LE(testing::max_abs_diff(permute_conjugate(p, km), expected), 0.0);
  }
}

TEST(PermuteConjugate, LengthMismatch) {
  EXPECT_EQ(kind_of([] { permute_conjugate(Permutation::identity(2), DenseMatrix(3, 3)); }),
            ErrorKind::kDimension);
}

TEST(PermuteConjugate, PreservesEntryMultisetAndSymmetry) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng() % 7;
    const auto km = trial % 2 ? random_symmetric(k, rng) : random_matrix(k, k, rng);
    const auto out = permute_conjugate(testing::random_permutation(k, rng), km);
    auto before = km.entries();
    auto after = out.entries();
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    EXPECT_EQ(before, after);
    if (trial % 2) {
      EXPECT_EQ(out, transpose(out));
    }
  }
}

TEST(EnumeratePermutations, Examples) {
  const auto one = enumerate_permutations(1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], Permutation::identity(1));

  EXPECT_EQ(enumerate_permutations(3).size(), 6u);

  const auto five = enumerate_permutations(5);
  ASSERT_EQ(five.size(), 120u);
  EXPECT_EQ(five.front(), Permutation::identity(5));
  EXPECT_EQ(five.back().mapping(), (std::vector<std::size_t>{4, 3, 2, 1, 0}));
}

TEST(EnumeratePermutations, CountDistinctAndLexicographic) {
  for (std::size_t k = 1; k <= 6; ++k) {
    const auto perms = enumerate_permutations(k);
    EXPECT_EQ(static_cast<double>(perms.size()), factorial(k));
    std::set<std::vector<std::size_t>> seen;
    for (const auto& p : perms) seen.insert(p.mapping());
    EXPECT_EQ(seen.size(), perms.size());
    for (std::size_t j = 1; j < perms.size(); ++j) {
      EXPECT_LT(perms[j - 1].mapping(), perms[j].mapping());
    }
  }
}

TEST(EnumeratePermutations, Errors) {
  EXPECT_EQ(kind_of([] { enumerate_permutations(0); }), ErrorKind::kDomain);
  try {
    enumerate_permutations(9);
    FAIL() << "expected a capacity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCapacity);
    EXPECT_NE(std::string(e.what()).find('8'), std::string::npos) << e.what();
  }
  EXPECT_EQ(enumerate_permutations(3, 3).size(), 6u);
  EXPECT_EQ(kind_of([] { enumerate_permutations(4, 3); }), ErrorKind::kCapacity);
}

TEST(SymmetricEigen, Diagonal) {
  const auto e = symmetric_eigendecomposition(DenseMatrix::from_rows({{3, 0}, {0, 1}}));
  EXPECT_EQ(e.lambda, (std::vector<double>{3, 1}));
  EXPECT_EQ(e.u, DenseMatrix::identity(2));
  EXPECT_DOUBLE_EQ(e.gap, 2.0);
}

TEST(SymmetricEigen, SwapMatrixHandSolved) {
  // det([[-l, 1], [1, -l]]) = l^2 - 1, so l = 1, -1.
  const auto e = symmetric_eigendecomposition(DenseMatrix::from_rows({{0, 1}, {1, 0}}));
  ASSERT_EQ(e.lambda.size(), 2u);
  EXPECT_NEAR(e.lambda[0], 1.0, 1e-14);
  EXPECT_NEAR(e.lambda[1], -1.0, 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(e.u(0, 0), r, 1e-14);
  EXPECT_NEAR(e.u(1, 0), r, 1e-14);
  // (1, -1)/sqrt2 has tied magnitudes; the first entry is made positive.
  EXPECT_NEAR(e.u(0, 1), r, 1e-14);
  EXPECT_NEAR(e.u(1, 1), -r, 1e-14);
}

TEST(SymmetricEigen, RejectsAsymmetric) {
  EXPECT_EQ(kind_of([] { symmetric_eigendecomposition(DenseMatrix::from_rows({{0, 1}, {0, 0}})); }),
            ErrorKind::kDomain);
  EXPECT_EQ(kind_of([] { symmetric_eigendecomposition(DenseMatrix(2, 3)); }),
            ErrorKind::kDimension);
}

TEST(SymmetricEigen, ReconstructionOrthogonalityTraceAgainstEigen) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + trial % 8;
    const auto a = random_symmetric(k, rng);
    const auto e = symmetric_eigendecomposition(a);

    const auto recon = multiply(multiply(e.u, DenseMatrix::diagonal(e.lambda)), transpose(e.u));
    EXPECT_LE(std::sqrt(frobenius_sq(recon, a)), 1e-8);
    EXPECT_LE(std::sqrt(frobenius_sq(multiply(e.u, transpose(e.u)), DenseMatrix::identity(k))), 1e-8);

    double sum = 0.0;
    for (double l : e.lambda) sum += l;
    EXPECT_NEAR(trace(a), sum, 1e-8);

    Eigen::MatrixXd ea(k, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) ea(i, j) = a(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(ea);
    const Eigen::VectorXd ref = solver.eigenvalues();  // ascending
    for (std::size_t j = 0; j < k; ++j) {
      EXPECT_NEAR(e.lambda[j], ref(static_cast<Eigen::Index>(k - 1 - j)), 1e-10);
      if (j + 1 < k) {
        EXPECT_GE(e.lambda[j], e.lambda[j + 1]);
      }
    }
    // Random spectra are simple, so eigenvectors agree with Eigen's up to sign.
    for (std::size_t j = 0; j < k; ++j) {
      const Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(k - 1 - j));
      double dot = 0.0;
      for (std::size_t i = 0; i < k; ++i) dot += v(static_cast<Eigen::Index>(i)) * e.u(i, j);
      EXPECT_NEAR(std::abs(dot), 1.0, 1e-8);
    }
  }
}

TEST(SymmetricEigen, SignCanonicalization) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + trial % 6;
    const auto e = symmetric_eigendecomposition(random_symmetric(k, rng));
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < k; ++i) {
        if (std::abs(e.u(i, j)) > std::abs(e.u(arg, j))) arg = i;
      }
      EXPECT_GT(e.u(arg, j), 0.0);
    }
  }
}

TEST(SymmetricEigen, RepeatedEigenvaluesHaveZeroGap) {
  const auto e = symmetric_eigendecomposition(DenseMatrix(3, 3));
  EXPECT_EQ(e.gap, 0.0);
  EXPECT_TRUE(std::isinf(symmetric_eigendecomposition(DenseMatrix(1, 1, 5.0)).gap));
}

TEST(AbsEntrywise, Examples) {
  const auto a = DenseMatrix::from_rows({{-1, 2}, {0, -3}});
  EXPECT_EQ(abs_entrywise(a), DenseMatrix::from_rows({{1, 2}, {0, 3}}));
  const auto nn = DenseMatrix::from_rows({{0.5, 2}, {0, 3}});
  EXPECT_EQ(abs_entrywise(nn), nn);
  EXPECT_EQ(abs_entrywise(abs_entrywise(a)), abs_entrywise(a));
}

TEST(Helpers, TransposeMultiplySymmetrize) {
  const auto a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(transpose(a), DenseMatrix::from_rows({{1, 3}, {2, 4}}));
  EXPECT_EQ(multiply(a, a), DenseMatrix::from_rows({{7, 10}, {15, 22}}));
  EXPECT_EQ(symmetrize(a), DenseMatrix::from_rows({{1, 2.5}, {2.5, 4}}));
  EXPECT_EQ(trace(a), 5.0);
  EXPECT_TRUE(all_finite(a));
  EXPECT_EQ(kind_of([] { multiply(DenseMatrix(2, 3), DenseMatrix(2, 3)); }), ErrorKind::kDimension);
}

}  // namespace
}  // namespace isonn
