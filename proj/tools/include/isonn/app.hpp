// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

// Command implementations behind the isonn executable. Kept in a library so
// tests can drive them without spawning processes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "isonn/bench.hpp"
#include "isonn/classifier.hpp"
#include "isonn/error.hpp"
#include "isonn/data.hpp"
#include "isonn/isofeat.hpp"

namespace isonn::app {

enum class DatasetFormat { kTu, kNative };
enum class Sweep { kNone, kK, kC };

struct LayerSpec {
  std::size_t k = 4;
  std::size_t c = 1;
};

/// Parses "k:c[,k:c...]"; throws kConfig.
std::vector<LayerSpec> parse_layers(const std::string& text);

struct RunConfig {
  std::string dataset;
  DatasetFormat format = DatasetFormat::kTu;
  std::vector<LayerSpec> layers{{4, 1}};
  MatchMode mode = MatchMode::kBrute;
  SoftmaxAxis softmax_axis = SoftmaxAxis::kPerKernel;
  std::size_t max_brute_k = kDefaultMaxBruteK;
  std::size_t epochs = 150;
  double learning_rate = 0.001;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t folds = 3;
  std::optional<BalanceStrategy> balance = BalanceStrategy::kUndersample;
  std::size_t hidden1 = kDefaultHidden1;
  std::size_t hidden2 = kDefaultHidden2;
  std::string out;
  std::string checkpoint;
  std::size_t threads = 1;

  // bench
  Sweep sweep = Sweep::kNone;
  bool compare_fast = false;
  std::vector<std::size_t> k_values{2, 3, 4, 5};
  std::vector<std::size_t> c_values{1, 2, 4, 8};
  std::size_t repetitions = 3;

  // gen, and the graph size for bench
  std::string motif = "clique3";
  std::size_t n = 28;
  std::size_t count = 100;
};

/// Sets one key from its textual value, as given on the command line or in a
/// config file. Keys are the long flag names without dashes. Throws kConfig
/// on an unknown key or unparseable value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads a JSON object of key/value settings and applies them in file order.
void apply_config_file(RunConfig& config, const std::string& path);

/// Every key accepted by apply_setting.
const std::vector<std::string>& setting_keys();

struct FoldOutcome {
  Metrics test;
  Metrics train;
  std::vector<double> epoch_loss;
  std::string checkpoint_path;
};

struct TrainSummary {
  std::vector<FoldOutcome> folds;
  Metrics mean;
  std::size_t padded_size = 0;
  std::size_t graphs = 0;
};

/// Fold rotation: train on all folds but one, test on the remaining one.
/// Writes metrics.csv, loss_trace.csv and fold<r>.ckpt into config.out.
TrainSummary cmd_train(const RunConfig& config, std::ostream& log);

/// Evaluates config.checkpoint on config.dataset. Writes a one-row CSV
/// (graphs,accuracy,f1) to config.out when set.
Metrics cmd_eval(const RunConfig& config, std::ostream& log);

/// Features of every graph as CSV rows (label, then flattened Q) at
/// config.out. Uses the checkpoint's kernels when given, else fresh seeded
/// kernels built from config.layers.
std::size_t cmd_extract(const RunConfig& config, std::ostream& log);

/// Timing CSV at config.out, or to `log` when out is empty.
BenchReport cmd_bench(const RunConfig& config, std::ostream& log);

/// Planted-motif dataset in native format at config.out.
std::size_t cmd_gen(const RunConfig& config, std::ostream& log);

/// Process exit status for a library error kind.
int exit_code(ErrorKind kind) noexcept;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

}  // namespace isonn::app
