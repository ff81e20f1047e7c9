// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "isonn/app.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <ostream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "isonn/error.hpp"

namespace isonn::app {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_fail(const std::string& key, const std::string& what) {
  fail(ErrorKind::kConfig, "--" + key + ": " + what);
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const char* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || p != end || value.empty()) {
    config_fail(key, "expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || p != end || value.empty()) {
    config_fail(key, "expected a number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  config_fail(key, "expected true or false, got '" + value + "'");
}

std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_count(key, item));
  if (out.empty()) config_fail(key, "expected a comma-separated list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; }},
      {"format",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "tu") c.format = DatasetFormat::kTu;
         else if (v == "native") c.format = DatasetFormat::kNative;
         else config_fail(k, "expected tu or native, got '" + v + "'");
       }},
      {"layers", [](RunConfig& c, const std::string&, const std::string& v) { c.layers = parse_layers(v); }},
      {"mode",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "brute") c.mode = MatchMode::kBrute;
         else if (v == "fast") c.mode = MatchMode::kFast;
         else config_fail(k, "expected brute or fast, got '" + v + "'");
       }},
      {"softmax",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "per-kernel") c.softmax_axis = SoftmaxAxis::kPerKernel;
         else if (v == "across-kernels") c.softmax_axis = SoftmaxAxis::kAcrossKernels;
         else config_fail(k, "expected per-kernel or across-kernels, got '" + v + "'");
       }},
      {"max-brute-k",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.max_brute_k = parse_count(k, v); }},
      {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_count(k, v); }},
      {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.learning_rate = parse_real(k, v); }},
      {"batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_count(k, v); }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_count(k, v); }},
      {"folds", [](RunConfig& c, const std::string& k, const std::string& v) { c.folds = parse_count(k, v); }},
      {"balance",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "under") c.balance = BalanceStrategy::kUndersample;
         else if (v == "over") c.balance = BalanceStrategy::kOversample;
         else if (v == "none") c.balance.reset();
         else config_fail(k, "expected under, over or none, got '" + v + "'");
       }},
      {"hidden1", [](RunConfig& c, const std::string& k, const std::string& v) { c.hidden1 = parse_count(k, v); }},
      {"hidden2", [](RunConfig& c, const std::string& k, const std::string& v) { c.hidden2 = parse_count(k, v); }},
      {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
      {"checkpoint", [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; }},
      {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = parse_count(k, v); }},
      {"sweep",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "k") c.sweep = Sweep::kK;
         else if (v == "c") c.sweep = Sweep::kC;
         else if (v == "none") c.sweep = Sweep::kNone;
         else config_fail(k, "expected k or c, got '" + v + "'");
       }},
      {"compare-fast",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.compare_fast = parse_bool(k, v); }},
      {"k-values",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.k_values = parse_count_list(k, v); }},
      {"c-values",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.c_values = parse_count_list(k, v); }},
      {"reps", [](RunConfig& c, const std::string& k, const std::string& v) { c.repetitions = parse_count(k, v); }},
      {"motif", [](RunConfig& c, const std::string&, const std::string& v) { c.motif = v; }},
      {"n", [](RunConfig& c, const std::string& k, const std::string& v) { c.n = parse_count(k, v); }},
      {"count", [](RunConfig& c, const std::string& k, const std::string& v) { c.count = parse_count(k, v); }},
  };
  return table;
}

// Shortest round-trip text for a double, so repeated runs write identical bytes.
std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Removes everything it created unless committed.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove(*it, ec);
  }

  void directory(const fs::path& dir) {
    if (dir.empty() || fs::exists(dir)) return;
    directory(dir.parent_path());
    std::error_code ec;
    if (!fs::create_directory(dir, ec) && ec) {
      fail(ErrorKind::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
    }
    created_.push_back(dir);
  }

  fs::path file(const fs::path& path) {
    directory(path.parent_path());
    created_.push_back(path);
    return path;
  }

  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> created_;
  bool committed_ = false;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorKind::kIo, "cannot write " + path.string());
  return os;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.close();
  if (!os) fail(ErrorKind::kIo, "write failed for " + path.string());
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) config_fail(key, what);
}

std::vector<LayerConfig> layer_configs(const RunConfig& config) {
  require(!config.layers.empty(), "layers", "at least one layer is required");
  std::vector<LayerConfig> out;
  for (const auto& spec : config.layers) {
    LayerConfig lc;
    lc.size_k = spec.k;
    lc.channels_c = spec.c;
    lc.mode = config.mode;
    lc.softmax_axis = config.softmax_axis;
    lc.max_brute_k = config.max_brute_k;
    lc.validate();
    out.push_back(lc);
  }
  return out;
}

TrainConfig train_config(const RunConfig& config) {
  TrainConfig tc;
  tc.learning_rate = config.learning_rate;
  tc.epochs = config.epochs;
  tc.batch_size = config.batch_size;
  tc.seed = config.seed;
  tc.validate();
  return tc;
}

void check_common(const RunConfig& config) {
  require(config.threads >= 1, "threads", "must be >= 1");
}

Dataset load_dataset(const RunConfig& config) {
  require(!config.dataset.empty(), "dataset", "a dataset path is required");
  return config.format == DatasetFormat::kTu ? load_tu_dataset(config.dataset)
                                             : load_native(config.dataset);
}

std::vector<int> predict_all(const ModelParams& model, const Dataset& ds, const ExecOptions& exec) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& g : ds.graphs) out.push_back(predict(model, g.adjacency, exec));
  return out;
}

std::vector<int> labels_of(const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& g : ds.graphs) out.push_back(g.label);
  return out;
}

void check_input_size(const ModelParams& model, const Dataset& ds) {
  if (ds.padded_size != model.input_size) {
    fail(ErrorKind::kDimension, "checkpoint expects padded size " + std::to_string(model.input_size) +
                                    ", dataset pads to " + std::to_string(ds.padded_size));
  }
}

}  // namespace

std::vector<LayerSpec> parse_layers(const std::string& text) {
  std::vector<LayerSpec> out;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const auto end = std::min(text.find(',', begin), text.size());
    const std::string item = text.substr(begin, end - begin);
    begin = end + 1;
    const auto colon = item.find(':');
    if (colon == std::string::npos) config_fail("layers", "expected k:c, got '" + item + "'");
    LayerSpec spec;
    spec.k = parse_count("layers", item.substr(0, colon));
    spec.c = parse_count("layers", item.substr(colon + 1));
    out.push_back(spec);
  }
  return out;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) fail(ErrorKind::kConfig, "unknown setting '" + key + "'");
  it->second(config, key, value);
}

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot open config file " + path);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, path + ": " + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::kConfig, path + ": expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& v : value) {
        if (!text.empty()) text += ',';
        text += v.is_string() ? v.get<std::string>() : v.dump();
      }
    } else {
      text = value.dump();
    }
    apply_setting(config, key, text);
  }
}

TrainSummary cmd_train(const RunConfig& config, std::ostream& log) {
  check_common(config);
  const auto layers = layer_configs(config);
  const TrainConfig base = train_config(config);
  require(config.folds >= 2, "folds", "need at least 2 folds for a train/test rotation");
  require(!config.out.empty(), "out", "an output directory is required");
  require(config.hidden1 >= 1 && config.hidden2 >= 1, "hidden1", "hidden widths must be >= 1");

  Dataset ds = load_dataset(config);
  if (ds.empty()) fail(ErrorKind::kDomain, "dataset " + config.dataset + " is empty");
  if (config.balance) ds = balance(ds, *config.balance, config.seed);
  ds = pad_to_max(std::move(ds));
  std::vector<IsoLayer> shape_probe;
  for (const auto& lc : layers) {
    shape_probe.push_back({std::vector<KernelVariable>(lc.channels_c, KernelVariable(DenseMatrix(lc.size_k, lc.size_k))), lc});
  }
  stack_output_shape(ds.padded_size, shape_probe);
  const FoldSplit split = make_folds(ds, config.seed, config.folds);
  const ExecOptions exec{config.threads};

  log << "dataset: " << ds.size() << " graphs (" << ds.count(1) << " positive, " << ds.count(-1)
      << " negative), padded to " << ds.padded_size << "\n";

  OutputGuard guard;
  const fs::path out_dir(config.out);
  guard.directory(out_dir);

  TrainSummary summary;
  summary.padded_size = ds.padded_size;
  summary.graphs = ds.size();
  for (std::size_t r = 0; r < config.folds; ++r) {
    const Dataset train_set = subset(ds, split.train_indices(r));
    const Dataset test_set = subset(ds, split.test_indices(r));
    ModelSpec spec;
    spec.input_size = ds.padded_size;
    spec.layers = layers;
    spec.hidden1 = config.hidden1;
    spec.hidden2 = config.hidden2;
    ModelParams model = make_model(spec, mix_seed(config.seed, 2 * r));
    TrainConfig tc = base;
    tc.seed = mix_seed(config.seed, 2 * r + 1);

    FoldOutcome fold;
    fold.epoch_loss = train(model, train_set.graphs, tc, exec).epoch_loss;
    fold.test = metrics(predict_all(model, test_set, exec), labels_of(test_set));
    fold.train = metrics(predict_all(model, train_set, exec), labels_of(train_set));
    fold.checkpoint_path = guard.file(out_dir / ("fold" + std::to_string(r) + ".ckpt")).string();
    save_checkpoint(fold.checkpoint_path, model);
    log << "fold " << r << ": test accuracy " << fold.test.accuracy << ", f1 " << fold.test.f1
        << "; train accuracy " << fold.train.accuracy << "\n";
    summary.folds.push_back(std::move(fold));
  }

  Metrics train_mean;
  for (const auto& f : summary.folds) {
    summary.mean.accuracy += f.test.accuracy / static_cast<double>(config.folds);
    summary.mean.f1 += f.test.f1 / static_cast<double>(config.folds);
    train_mean.accuracy += f.train.accuracy / static_cast<double>(config.folds);
    train_mean.f1 += f.train.f1 / static_cast<double>(config.folds);
  }

  const fs::path metrics_path = guard.file(out_dir / "metrics.csv");
  auto mos = open_out(metrics_path);
  mos << "fold,test_accuracy,test_f1,train_accuracy,train_f1\n";
  for (std::size_t r = 0; r < summary.folds.size(); ++r) {
    const auto& f = summary.folds[r];
    mos << r << ',' << fmt(f.test.accuracy) << ',' << fmt(f.test.f1) << ',' << fmt(f.train.accuracy)
        << ',' << fmt(f.train.f1) << '\n';
  }
  mos << "mean," << fmt(summary.mean.accuracy) << ',' << fmt(summary.mean.f1) << ','
      << fmt(train_mean.accuracy) << ',' << fmt(train_mean.f1) << '\n';
  finish(mos, metrics_path);

  const fs::path trace_path = guard.file(out_dir / "loss_trace.csv");
  auto tos = open_out(trace_path);
  tos << "fold,epoch,loss\n";
  for (std::size_t r = 0; r < summary.folds.size(); ++r) {
    const auto& loss = summary.folds[r].epoch_loss;
    for (std::size_t e = 0; e < loss.size(); ++e) tos << r << ',' << e + 1 << ',' << fmt(loss[e]) << '\n';
  }
  finish(tos, trace_path);

  log << "mean test accuracy " << summary.mean.accuracy << ", f1 " << summary.mean.f1 << "\n";
  guard.commit();
  return summary;
}

Metrics cmd_eval(const RunConfig& config, std::ostream& log) {
  check_common(config);
  require(!config.checkpoint.empty(), "checkpoint", "a checkpoint path is required");
  const ModelParams model = load_checkpoint(config.checkpoint);
  Dataset ds = load_dataset(config);
  if (ds.empty()) fail(ErrorKind::kDomain, "dataset " + config.dataset + " is empty");
  ds = pad_to_max(std::move(ds));
  check_input_size(model, ds);

  const ExecOptions exec{config.threads};
  const Metrics m = metrics(predict_all(model, ds, exec), labels_of(ds));
  log << "accuracy " << m.accuracy << ", f1 " << m.f1 << " on " << ds.size() << " graphs\n";
  if (!config.out.empty()) {
    OutputGuard guard;
    const fs::path path = guard.file(config.out);
    auto os = open_out(path);
    os << "graphs,accuracy,f1\n" << ds.size() << ',' << fmt(m.accuracy) << ',' << fmt(m.f1) << '\n';
    finish(os, path);
    guard.commit();
  }
  return m;
}

std::size_t cmd_extract(const RunConfig& config, std::ostream& log) {
  check_common(config);
  require(!config.out.empty(), "out", "an output file is required");
  std::vector<IsoLayer> layers;
  std::optional<std::size_t> expected_size;
  if (!config.checkpoint.empty()) {
    ModelParams model = load_checkpoint(config.checkpoint);
    layers = std::move(model.layers);
    expected_size = model.input_size;
  } else {
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& lc : layer_configs(config)) {
      IsoLayer layer{{}, lc};
      for (std::size_t i = 0; i < lc.channels_c; ++i) {
        DenseMatrix k(lc.size_k, lc.size_k);
        for (double& x : k.data()) x = unit(rng);
        layer.kernels.emplace_back(std::move(k));
      }
      layers.push_back(std::move(layer));
    }
  }

  Dataset ds = pad_to_max(load_dataset(config));
  if (expected_size && !ds.empty() && ds.padded_size != *expected_size) {
    fail(ErrorKind::kDimension, "checkpoint expects padded size " + std::to_string(*expected_size) +
                                    ", dataset pads to " + std::to_string(ds.padded_size));
  }
  if (!ds.empty()) stack_output_shape(ds.padded_size, layers);

  OutputGuard guard;
  const fs::path path = guard.file(config.out);
  auto os = open_out(path);
  const ExecOptions exec{config.threads};
  for (const auto& g : ds.graphs) {
    const FeatureTensor q = forward_stack(g.adjacency, layers, exec).q;
    os << g.label;
    for (double v : q.values) os << ',' << fmt(v);
    os << '\n';
  }
  finish(os, path);
  guard.commit();
  log << "wrote features of " << ds.size() << " graphs to " << config.out << "\n";
  return ds.size();
}

BenchReport cmd_bench(const RunConfig& config, std::ostream& log) {
  check_common(config);
  const bool sweeping = config.sweep != Sweep::kNone;
  if (sweeping == config.compare_fast) {
    fail(ErrorKind::kConfig, "choose exactly one of --sweep k, --sweep c or --compare-fast");
  }
  require(config.repetitions >= 3, "reps", "at least 3 repetitions are required");
  require(config.n >= 1, "n", "must be >= 1");
  require(config.count >= 1, "count", "must be >= 1");
  require(!config.layers.empty(), "layers", "at least one layer is required");
  for (std::size_t c : config.c_values) require(c >= 1, "c-values", "channel counts must be >= 1");
  for (std::size_t k : config.k_values) {
    require(k >= 1 && k <= config.n, "k-values", "kernel sizes must lie in [1, n]");
  }
  if (config.sweep == Sweep::kC) {
    require(config.layers.front().k >= 1 && config.layers.front().k <= config.n, "layers",
            "kernel size must lie in [1, n]");
  }

  BenchOptions opts;
  opts.repetitions = config.repetitions;
  opts.threads = config.threads;
  opts.seed = config.seed;
  opts.max_brute_k = config.max_brute_k;
  const auto graphs = bench_graphs(config.n, config.count, config.seed);

  BenchReport report;
  if (config.compare_fast) {
    report = brute_vs_fast(graphs, config.k_values, opts);
  } else if (config.sweep == Sweep::kK) {
    report = time_vs_k(graphs, config.k_values, config.layers.front().c, config.mode, opts);
  } else {
    report = time_vs_c(graphs, config.c_values, config.layers.front().k, config.mode, opts);
  }
  for (const auto& w : report.warnings) log << "warning: " << w << "\n";

  if (config.out.empty()) {
    write_bench_csv(log, report.records);
  } else {
    OutputGuard guard;
    const fs::path path = guard.file(config.out);
    write_bench_csv(path.string(), report.records);
    guard.commit();
  }
  return report;
}

std::size_t cmd_gen(const RunConfig& config, std::ostream& log) {
  require(!config.out.empty(), "out", "an output file is required");
  require(config.count >= 1, "count", "must be >= 1");
  const DenseMatrix motif = motif_by_name(config.motif);
  require(motif.rows() <= config.n, "n", "motif " + config.motif + " does not fit in " +
                                             std::to_string(config.n) + " nodes");
  const Dataset ds = gen_synthetic(config.count, config.n, motif, config.seed);

  OutputGuard guard;
  const fs::path path = guard.file(config.out);
  save_native(path.string(), ds);
  guard.commit();
  log << "wrote " << ds.size() << " graphs to " << config.out << "\n";
  return ds.size();
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kCapacity:
      return kExitUsage;
    case ErrorKind::kNumerical:
      return kExitNumerical;
    default:
      return kExitData;
  }
}

}  // namespace isonn::app
