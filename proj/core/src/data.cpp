// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "isonn/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "isonn/error.hpp"

namespace isonn {

namespace fs = std::filesystem;

GraphInstance make_graph(DenseMatrix adjacency, int label) {
  if (!adjacency.is_square()) fail(ErrorKind::kDomain, "adjacency must be square");
  if (label != 1 && label != -1) {
    fail(ErrorKind::kDomain, "label must be +1 or -1, got " + std::to_string(label));
  }
  const std::size_t n = adjacency.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) fail(ErrorKind::kDomain, "adjacency has a self loop");
    for (std::size_t j = 0; j < n; ++j) {
      const double v = adjacency(i, j);
      if (v != 0.0 && v != 1.0) fail(ErrorKind::kDomain, "adjacency is not binary");
      if (v != adjacency(j, i)) fail(ErrorKind::kDomain, "adjacency is not symmetric");
    }
  }
  return GraphInstance{std::move(adjacency), label};
}

std::size_t Dataset::count(int label) const noexcept {
  return static_cast<std::size_t>(std::count_if(
      graphs.begin(), graphs.end(), [label](const GraphInstance& g) { return g.label == label; }));
}

std::size_t Dataset::max_nodes() const noexcept {
  std::size_t n = 0;
  for (const auto& g : graphs) n = std::max(n, g.node_count());
  return n;
}

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return in;
}

[[noreturn]] void parse_fail(const fs::path& file, std::size_t line, const std::string& what) {
  fail(ErrorKind::kParse, file.filename().string() + ":" + std::to_string(line) + ": " + what);
}

long long parse_integer(const std::string& token, const fs::path& file, std::size_t line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(token, &pos);
  } catch (const std::exception&) {
    parse_fail(file, line, "expected an integer, got '" + token + "'");
  }
  while (pos < token.size() && std::isspace(static_cast<unsigned char>(token[pos]))) ++pos;
  if (pos != token.size()) parse_fail(file, line, "trailing characters in '" + token + "'");
  return v;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char ch) { return std::isspace(ch) != 0; });
}

std::string tu_prefix(const fs::path& dir) {
  fs::path p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  const std::string name = p.filename().string();
  if (fs::exists(dir / (name + "_A.txt"))) return name;
  std::vector<std::string> found;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string f = entry.path().filename().string();
      if (f.size() > 6 && f.ends_with("_A.txt")) found.push_back(f.substr(0, f.size() - 6));
    }
  }
  if (found.size() == 1) return found.front();
  return name;  // missing-file error will name the expected file
}

}  // namespace

Dataset load_tu_dataset(const std::string& directory) {
  const fs::path dir(directory);
  const std::string ds = tu_prefix(dir);
  const fs::path a_path = dir / (ds + "_A.txt");
  const fs::path ind_path = dir / (ds + "_graph_indicator.txt");
  const fs::path lab_path = dir / (ds + "_graph_labels.txt");
  for (const auto& p : {a_path, ind_path, lab_path}) {
    if (!fs::exists(p)) fail(ErrorKind::kIo, "missing file " + p.string());
  }

  // Node m (1-based) -> graph id, and its local index in that graph.
  std::vector<std::size_t> graph_of, local_of;
  std::vector<std::size_t> nodes_in;  // [graph id - 1]
  {
    auto in = open_input(ind_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (blank(line)) continue;
      const long long g = parse_integer(line, ind_path, lineno);
      if (g < 1) parse_fail(ind_path, lineno, "graph id must be >= 1");
      const auto gid = static_cast<std::size_t>(g);
      if (gid > nodes_in.size()) nodes_in.resize(gid, 0);
      graph_of.push_back(gid - 1);
      local_of.push_back(nodes_in[gid - 1]++);
    }
  }

  std::vector<long long> raw_labels;
  {
    auto in = open_input(lab_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (blank(line)) continue;
      raw_labels.push_back(parse_integer(line, lab_path, lineno));
    }
  }
  if (raw_labels.size() < nodes_in.size()) {
    fail(ErrorKind::kParse, lab_path.filename().string() + " has " +
                                std::to_string(raw_labels.size()) + " labels but " +
                                std::to_string(nodes_in.size()) + " graphs are indexed");
  }
  nodes_in.resize(raw_labels.size(), 0);
  for (std::size_t g = 0; g < nodes_in.size(); ++g) {
    if (nodes_in[g] == 0) {
      fail(ErrorKind::kParse, "graph " + std::to_string(g + 1) + " has no nodes");
    }
  }

  const std::set<long long> distinct(raw_labels.begin(), raw_labels.end());
  if (distinct.size() > 2) fail(ErrorKind::kParse, "more than two distinct graph labels");
  const long long positive = distinct.size() == 2 ? *distinct.rbegin() : 1;

  std::vector<DenseMatrix> adj;
  adj.reserve(nodes_in.size());
  for (std::size_t n : nodes_in) adj.emplace_back(n, n);
  {
    auto in = open_input(a_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (blank(line)) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) parse_fail(a_path, lineno, "expected 'i, j'");
      const long long i = parse_integer(line.substr(0, comma), a_path, lineno);
      const long long j = parse_integer(line.substr(comma + 1), a_path, lineno);
      const auto count = static_cast<long long>(graph_of.size());
      if (i < 1 || i > count || j < 1 || j > count) {
        parse_fail(a_path, lineno, "node id out of range 1.." + std::to_string(count));
      }
      const std::size_t u = static_cast<std::size_t>(i - 1), v = static_cast<std::size_t>(j - 1);
      if (graph_of[u] != graph_of[v]) parse_fail(a_path, lineno, "edge joins two graphs");
      if (u == v) continue;  // simple graphs only
      DenseMatrix& m = adj[graph_of[u]];
      m(local_of[u], local_of[v]) = 1.0;
      m(local_of[v], local_of[u]) = 1.0;
    }
  }

  Dataset out;
  out.graphs.reserve(adj.size());
  for (std::size_t g = 0; g < adj.size(); ++g) {
    const long long raw = raw_labels[g];
    const int label = distinct.size() == 2 ? (raw == positive ? 1 : -1) : (raw > 0 ? 1 : -1);
    out.graphs.push_back(make_graph(std::move(adj[g]), label));
  }
  return out;
}

Dataset pad_to_max(Dataset dataset) {
  const std::size_t n = dataset.max_nodes();
  for (auto& g : dataset.graphs) {
    if (g.node_count() == n) continue;
    DenseMatrix padded(n, n);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      for (std::size_t j = 0; j < g.node_count(); ++j) padded(i, j) = g.adjacency(i, j);
    }
    g.adjacency = std::move(padded);
  }
  dataset.padded_size = n;
  return dataset;
}

Dataset load_native(const std::string& path) {
  const fs::path file(path);
  auto in = open_input(file);
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      parse_fail(file, lineno, e.what());
    }
    if (!rec.is_object() || !rec.contains("label") || !rec.contains("adj")) {
      parse_fail(file, lineno, "record needs \"label\" and \"adj\"");
    }
    if (!rec["label"].is_number_integer()) parse_fail(file, lineno, "label must be an integer");
    const auto& adj = rec["adj"];
    if (!adj.is_array()) parse_fail(file, lineno, "adj must be an array of rows");
    const std::size_t n = adj.size();
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!adj[i].is_array() || adj[i].size() != n) {
        parse_fail(file, lineno, "adj must be square");
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (!adj[i][j].is_number()) parse_fail(file, lineno, "adj entries must be 0 or 1");
        m(i, j) = adj[i][j].get<double>();
      }
    }
    try {
      out.graphs.push_back(make_graph(std::move(m), rec["label"].get<int>()));
    } catch (const Error& e) {
      parse_fail(file, lineno, e.what());
    }
  }
  return out;
}

std::string to_native_line(const GraphInstance& graph) {
  std::ostringstream os;
  os << "{\"label\":" << graph.label << ",\"adj\":[";
  const std::size_t n = graph.node_count();
  for (std::size_t i = 0; i < n; ++i) {
    os << (i ? ",[" : "[");
    for (std::size_t j = 0; j < n; ++j) os << (j ? "," : "") << (graph.adjacency(i, j) != 0.0 ? 1 : 0);
    os << ']';
  }
  os << "]}";
  return os.str();
}

void save_native(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  for (const auto& g : dataset.graphs) out << to_native_line(g) << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed for " + path);
}

std::vector<std::size_t> FoldSplit::test_indices(std::size_t round) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == round) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t round) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != round) out.push_back(i);
  }
  return out;
}

FoldSplit make_folds(const Dataset& dataset, std::uint64_t seed, std::size_t folds) {
  if (folds == 0) fail(ErrorKind::kConfig, "fold count must be >= 1");
  if (dataset.size() < folds) {
    fail(ErrorKind::kDomain, "dataset of " + std::to_string(dataset.size()) +
                                 " graphs is too small for " + std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (dataset.graphs[i].label == 1 ? pos : neg).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  FoldSplit split;
  split.folds = folds;
  split.fold_of.assign(dataset.size(), 0);
  std::size_t next = 0;
  for (std::size_t i : pos) split.fold_of[i] = next++ % folds;
  for (std::size_t i : neg) split.fold_of[i] = next++ % folds;
  return split;
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out;
  out.padded_size = dataset.padded_size;
  out.graphs.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= dataset.size()) fail(ErrorKind::kIndex, "subset index out of range");
    out.graphs.push_back(dataset.graphs[i]);
  }
  return out;
}

Dataset balance(const Dataset& dataset, BalanceStrategy strategy, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (dataset.graphs[i].label == 1 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) fail(ErrorKind::kDomain, "balancing needs both classes present");
  std::vector<std::size_t>& major = pos.size() >= neg.size() ? pos : neg;
  std::vector<std::size_t>& minor = pos.size() >= neg.size() ? neg : pos;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  if (strategy == BalanceStrategy::kUndersample) {
    std::shuffle(major.begin(), major.end(), rng);
    major.resize(minor.size());
    keep = minor;
    keep.insert(keep.end(), major.begin(), major.end());
    std::sort(keep.begin(), keep.end());
  } else {
    keep.resize(dataset.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    std::uniform_int_distribution<std::size_t> pick(0, minor.size() - 1);
    for (std::size_t extra = major.size() - minor.size(); extra > 0; --extra) {
      keep.push_back(minor[pick(rng)]);
    }
  }
  return subset(dataset, keep);
}

SyntheticDataset plant_motifs(std::size_t num_graphs, std::size_t n, const DenseMatrix& motif,
                              std::uint64_t seed) {
  if (!motif.is_square() || motif.rows() == 0) fail(ErrorKind::kDomain, "motif must be square");
  const std::size_t k = motif.rows();
  make_graph(motif, 1);  // motif must itself be a simple graph
  if (k > n) {
    fail(ErrorKind::kDomain, "motif of size " + std::to_string(k) + " does not fit in " +
                                 std::to_string(n) + " nodes");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> offset(0, n - k);
  SyntheticDataset out;
  out.dataset.graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (unit(rng) < kBackgroundEdgeProbability) a(i, j) = a(j, i) = 1.0;
      }
    }
    const bool positive = g % 2 == 0;
    std::optional<std::size_t> at;
    if (positive) {
      const std::size_t p = offset(rng);
      std::vector<std::size_t> relabel(k);
      std::iota(relabel.begin(), relabel.end(), std::size_t{0});
      std::shuffle(relabel.begin(), relabel.end(), rng);
      const DenseMatrix block = permute_conjugate(Permutation(relabel), motif);
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) a(p + i, p + j) = block(i, j);
      }
      at = p;
    }
    out.dataset.graphs.push_back(make_graph(std::move(a), positive ? 1 : -1));
    out.planted_at.push_back(at);
  }
  return out;
}

Dataset gen_synthetic(std::size_t num_graphs, std::size_t n, const DenseMatrix& motif,
                      std::uint64_t seed) {
  return plant_motifs(num_graphs, n, motif, seed).dataset;
}

DenseMatrix motif_by_name(const std::string& name) {
  std::size_t split = name.size();
  while (split > 0 && std::isdigit(static_cast<unsigned char>(name[split - 1]))) --split;
  const std::string kind = name.substr(0, split);
  if (split == name.size()) fail(ErrorKind::kConfig, "motif '" + name + "' needs a size suffix");
  const std::size_t k = std::stoul(name.substr(split));
  if (k < 2 || k > 64) fail(ErrorKind::kConfig, "motif size must be in [2, 64]");
  DenseMatrix m(k, k);
  auto link = [&m](std::size_t i, std::size_t j) { m(i, j) = m(j, i) = 1.0; };
  if (kind == "clique") {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) link(i, j);
    }
  } else if (kind == "path") {
    for (std::size_t i = 0; i + 1 < k; ++i) link(i, i + 1);
  } else if (kind == "cycle") {
    if (k < 3) fail(ErrorKind::kConfig, "cycle motif needs at least 3 nodes");
    for (std::size_t i = 0; i < k; ++i) link(i, (i + 1) % k);
  } else if (kind == "star") {
    for (std::size_t i = 1; i < k; ++i) link(0, i);
  } else {
    fail(ErrorKind::kConfig, "unknown motif '" + name + "' (clique, cycle, path, star)");
  }
  return m;
}

Metrics metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) fail(ErrorKind::kDomain, "metrics over an empty set");
  if (predictions.size() != labels.size()) {
    fail(ErrorKind::kDimension, "predictions and labels differ in length");
  }
  std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += predictions[i] == labels[i];
    tp += predictions[i] == 1 && labels[i] == 1;
    fp += predictions[i] == 1 && labels[i] != 1;
    fn += predictions[i] != 1 && labels[i] == 1;
  }
  Metrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return m;
}

}  // namespace isonn
