// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "isonn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <random>

#include "isonn/data.hpp"
#include "isonn/error.hpp"

namespace isonn {

namespace {

std::vector<KernelVariable> random_kernels(std::size_t k, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ (k * 0x9E3779B97F4A7C15ull));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<KernelVariable> out;
  for (std::size_t i = 0; i < c; ++i) {
    DenseMatrix v(k, k);
    for (double& x : v.data()) x = unit(rng);
    out.emplace_back(std::move(v));
  }
  return out;
}

double run_once(std::span<const DenseMatrix> graphs, std::span<const KernelVariable> kernels,
                const LayerConfig& cfg, const ExecOptions& exec) {
  const auto start = std::chrono::steady_clock::now();
  double sink = 0.0;
  for (const auto& g : graphs) sink += forward_layer(g, kernels, cfg, exec).q.values.front();
  const auto stop = std::chrono::steady_clock::now();
  volatile double keep = sink;
  (void)keep;
  return std::chrono::duration<double>(stop - start).count();
}

BenchRecord timed(std::span<const DenseMatrix> graphs, std::span<const KernelVariable> kernels,
                  const LayerConfig& cfg, const BenchOptions& opts) {
  std::vector<double> times;
  const ExecOptions exec{opts.threads};
  for (std::size_t r = 0; r < opts.repetitions; ++r) times.push_back(run_once(graphs, kernels, cfg, exec));
  std::sort(times.begin(), times.end());
  BenchRecord rec;
  rec.mode = cfg.mode;
  rec.k = cfg.size_k;
  rec.c = cfg.channels_c;
  rec.n = graphs.front().rows();
  rec.wall_time_seconds = std::max(times[times.size() / 2], 1e-9);
  rec.repetitions = opts.repetitions;
  return rec;
}

void check_inputs(std::span<const DenseMatrix> graphs, const BenchOptions& opts) {
  if (graphs.empty()) fail(ErrorKind::kConfig, "benchmark needs at least one graph");
  if (opts.repetitions < 3) fail(ErrorKind::kConfig, "benchmark needs at least 3 repetitions");
}

// Empty string when the point can run.
std::string skip_reason(std::size_t n, std::size_t k, MatchMode mode, const BenchOptions& opts) {
  if (k == 0 || k > n) {
    return "skipped k=" + std::to_string(k) + ": does not fit n=" + std::to_string(n);
  }
  if (mode == MatchMode::kBrute && k > opts.max_brute_k) {
    return "skipped brute k=" + std::to_string(k) + ": exceeds max_brute_k=" +
           std::to_string(opts.max_brute_k);
  }
  return {};
}

}  // namespace

std::vector<DenseMatrix> bench_graphs(std::size_t n, std::size_t count, std::uint64_t seed) {
  const Dataset ds = gen_synthetic(count, n, motif_by_name("clique3"), seed);
  std::vector<DenseMatrix> out;
  for (const auto& g : ds.graphs) out.push_back(g.adjacency);
  return out;
}

BenchRecord time_extraction(std::span<const DenseMatrix> graphs, std::size_t k, std::size_t c,
                            MatchMode mode, const BenchOptions& opts) {
  check_inputs(graphs, opts);
  LayerConfig cfg{k, c, mode, SoftmaxAxis::kPerKernel, opts.max_brute_k};
  cfg.validate();
  const auto kernels = random_kernels(k, c, opts.seed);
  return timed(graphs, kernels, cfg, opts);
}

BenchReport time_vs_k(std::span<const DenseMatrix> graphs, std::span<const std::size_t> k_values,
                      std::size_t c, MatchMode mode, const BenchOptions& opts) {
  check_inputs(graphs, opts);
  BenchReport report;
  for (std::size_t k : k_values) {
    if (auto why = skip_reason(graphs.front().rows(), k, mode, opts); !why.empty()) {
      report.warnings.push_back(why);
      continue;
    }
    report.records.push_back(time_extraction(graphs, k, c, mode, opts));
  }
  return report;
}

BenchReport time_vs_c(std::span<const DenseMatrix> graphs, std::span<const std::size_t> c_values,
                      std::size_t k, MatchMode mode, const BenchOptions& opts) {
  check_inputs(graphs, opts);
  BenchReport report;
  if (auto why = skip_reason(graphs.front().rows(), k, mode, opts); !why.empty()) {
    report.warnings.push_back(why);
    return report;
  }
  for (std::size_t c : c_values) {
    if (c == 0) fail(ErrorKind::kConfig, "channel count must be >= 1");
    report.records.push_back(time_extraction(graphs, k, c, mode, opts));
  }
  return report;
}

BenchReport brute_vs_fast(std::span<const DenseMatrix> graphs,
                          std::span<const std::size_t> k_values, const BenchOptions& opts) {
  check_inputs(graphs, opts);
  BenchReport report;
  for (std::size_t k : k_values) {
    if (auto why = skip_reason(graphs.front().rows(), k, MatchMode::kBrute, opts); !why.empty()) {
      report.warnings.push_back(why);
      continue;
    }
    const auto kernels = random_kernels(k, 1, opts.seed);
    for (MatchMode mode : {MatchMode::kBrute, MatchMode::kFast}) {
      const LayerConfig cfg{k, 1, mode, SoftmaxAxis::kPerKernel, opts.max_brute_k};
      report.records.push_back(timed(graphs, kernels, cfg, opts));
    }
  }
  return report;
}

LinearFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorKind::kDimension, "linear fit needs two equal-length series of >= 2 points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) fail(ErrorKind::kDomain, "linear fit needs distinct x values");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

void write_bench_csv(std::ostream& os, std::span<const BenchRecord> records) {
  os << kBenchCsvHeader << '\n';
  for (const auto& r : records) {
    os << to_string(r.mode) << ',' << r.k << ',' << r.c << ',' << r.n << ','
       << r.wall_time_seconds << ',' << r.repetitions << '\n';
  }
}

void write_bench_csv(const std::string& path, std::span<const BenchRecord> records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write " + path);
  write_bench_csv(os, records);
  if (!os) fail(ErrorKind::kIo, "write failed for " + path);
}

}  // namespace isonn
