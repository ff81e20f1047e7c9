// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

// Timing harness for the feature-extraction cost: runtime against kernel
// size, against channel count, and exhaustive against spectral matching.
// Only extraction is timed; no training.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "isonn/isofeat.hpp"
#include "isonn/linalg.hpp"

namespace isonn {

struct BenchRecord {
  MatchMode mode = MatchMode::kBrute;
  std::size_t k = 0;
  std::size_t c = 0;
  std::size_t n = 0;
  double wall_time_seconds = 0.0;  // median over repetitions
  std::size_t repetitions = 0;
};

struct BenchOptions {
  std::size_t repetitions = 3;  // at least 3
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::size_t max_brute_k = kDefaultMaxBruteK;
};

struct BenchReport {
  std::vector<BenchRecord> records;
  std::vector<std::string> warnings;  // skipped points
};

/// Background graphs with a planted triangle in every other graph.
std::vector<DenseMatrix> bench_graphs(std::size_t n, std::size_t count, std::uint64_t seed);

/// Median wall time of extracting features with c random kernels of size k
/// from every graph.
BenchRecord time_extraction(std::span<const DenseMatrix> graphs, std::size_t k, std::size_t c,
                            MatchMode mode, const BenchOptions& opts);

BenchReport time_vs_k(std::span<const DenseMatrix> graphs, std::span<const std::size_t> k_values,
                      std::size_t c, MatchMode mode, const BenchOptions& opts);

BenchReport time_vs_c(std::span<const DenseMatrix> graphs, std::span<const std::size_t> c_values,
                      std::size_t k, MatchMode mode, const BenchOptions& opts);

/// Brute and fast records for each k, timed on identical graphs and kernels.
BenchReport brute_vs_fast(std::span<const DenseMatrix> graphs,
                          std::span<const std::size_t> k_values, const BenchOptions& opts);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit fit_linear(std::span<const double> x, std::span<const double> y);

inline constexpr const char* kBenchCsvHeader = "mode,k,c,n,seconds,reps";

void write_bench_csv(std::ostream& os, std::span<const BenchRecord> records);
void write_bench_csv(const std::string& path, std::span<const BenchRecord> records);

}  // namespace isonn
