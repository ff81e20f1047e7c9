// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

// Graph datasets: TU-format and native line-delimited JSON ingestion,
// padding, stratified folds, class balancing, planted-motif generation and
// classification metrics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isonn/linalg.hpp"

namespace isonn {

/// An undirected simple graph with a binary label in {+1, -1}.
struct GraphInstance {
  DenseMatrix adjacency;  // symmetric, 0/1, zero diagonal
  int label = 1;

  std::size_t node_count() const noexcept { return adjacency.rows(); }
};

/// Validating constructor; throws kDomain on a non-square, asymmetric,
/// non-binary or looped adjacency, or a label other than +-1.
GraphInstance make_graph(DenseMatrix adjacency, int label);

struct Dataset {
  std::vector<GraphInstance> graphs;
  std::size_t padded_size = 0;  // 0 until pad_to_max

  std::size_t size() const noexcept { return graphs.size(); }
  bool empty() const noexcept { return graphs.empty(); }
  std::size_t count(int label) const noexcept;
  std::size_t max_nodes() const noexcept;
};

/// Reads DS_A.txt, DS_graph_indicator.txt and DS_graph_labels.txt from
/// `directory`, where DS is the directory name (or the unique prefix of an
/// *_A.txt file in it). Node and edge attribute files are ignored. With two
/// distinct raw labels the larger maps to +1 and the smaller to -1.
Dataset load_tu_dataset(const std::string& directory);

/// Zero-pads every adjacency bottom/right to the largest node count.
Dataset pad_to_max(Dataset dataset);

/// One JSON object per line: {"label": 1, "adj": [[0,1],[1,0]]}. Blank
/// lines are skipped.
Dataset load_native(const std::string& path);
void save_native(const std::string& path, const Dataset& dataset);
std::string to_native_line(const GraphInstance& graph);

struct FoldSplit {
  std::size_t folds = 3;
  std::vector<std::size_t> fold_of;  // per graph

  std::vector<std::size_t> test_indices(std::size_t round) const;
  std::vector<std::size_t> train_indices(std::size_t round) const;
};

/// Stratified by label, shuffled by seed. Fold sizes differ by at most one.
FoldSplit make_folds(const Dataset& dataset, std::uint64_t seed, std::size_t folds = 3);

enum class BalanceStrategy { kUndersample, kOversample };

Dataset balance(const Dataset& dataset, BalanceStrategy strategy, std::uint64_t seed);

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

struct SyntheticDataset {
  Dataset dataset;
  std::vector<std::optional<std::size_t>> planted_at;  // principal block offset
};

inline constexpr double kBackgroundEdgeProbability = 0.1;

/// Even-indexed graphs are positive: a random background with `motif`
/// written over a random principal block under a random relabeling.
/// Odd-indexed graphs are background only.
SyntheticDataset plant_motifs(std::size_t num_graphs, std::size_t n,
                              const DenseMatrix& motif, std::uint64_t seed);
Dataset gen_synthetic(std::size_t num_graphs, std::size_t n, const DenseMatrix& motif,
                      std::uint64_t seed);

/// "clique<k>", "cycle<k>", "path<k>" or "star<k>".
DenseMatrix motif_by_name(const std::string& name);

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // positive class
};

Metrics metrics(std::span<const int> predictions, std::span<const int> labels);

}  // namespace isonn
