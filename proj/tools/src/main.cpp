// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isonn/app.hpp"
#include "isonn/error.hpp"

namespace {

using isonn::app::RunConfig;

// Settings shared by several commands; each subcommand registers the ones it reads.
const std::map<std::string, std::string> kHelp = {
    {"dataset", "dataset path: a TU directory or a native .jsonl file"},
    {"format", "dataset format: tu or native"},
    {"layers", "isomorphic layers as k:c[,k:c...]"},
    {"mode", "matching: brute or fast"},
    {"softmax", "normalization: per-kernel or across-kernels"},
    {"max-brute-k", "largest kernel allowed in brute mode"},
    {"epochs", "training epochs"},
    {"lr", "Adam learning rate"},
    {"batch", "minibatch size"},
    {"seed", "seed for every random choice"},
    {"folds", "number of cross-validation folds"},
    {"balance", "class balancing: under, over or none"},
    {"hidden1", "first hidden layer width"},
    {"hidden2", "second hidden layer width"},
    {"out", "output directory (train) or file"},
    {"checkpoint", "model checkpoint path"},
    {"threads", "worker threads for window matching"},
    {"sweep", "benchmark sweep: k or c"},
    {"k-values", "kernel sizes to time, comma separated"},
    {"c-values", "channel counts to time, comma separated"},
    {"reps", "timing repetitions per point"},
    {"motif", "planted motif: clique<k>, cycle<k>, path<k>, star<k>"},
    {"n", "nodes per generated graph"},
    {"count", "number of generated graphs"},
};

struct Command {
  explicit Command(CLI::App* sub) : app(sub) {}

  CLI::App* app;
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  bool compare_fast = false;
  CLI::Option* compare_flag = nullptr;
};

void register_keys(Command& cmd, const std::vector<std::string>& keys) {
  cmd.app->add_option("--config", cmd.config_file, "JSON file of settings; flags override it");
  for (const auto& key : keys) {
    cmd.options[key] = cmd.app->add_option("--" + key, cmd.values[key], kHelp.at(key));
  }
}

RunConfig resolve(const Command& cmd) {
  RunConfig config;
  if (!cmd.config_file.empty()) isonn::app::apply_config_file(config, cmd.config_file);
  for (const auto& [key, opt] : cmd.options) {
    if (opt->count() > 0) isonn::app::apply_setting(config, key, cmd.values.at(key));
  }
  if (cmd.compare_flag != nullptr && cmd.compare_flag->count() > 0) config.compare_fast = true;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IsoNN graph classification: train, evaluate, extract features, benchmark."};
  app.require_subcommand(1);

  const std::vector<std::string> model_keys = {"dataset", "format", "layers", "mode", "softmax",
                                                "max-brute-k", "threads", "seed"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> keys = model_keys;
    keys.insert(keys.end(), extra.begin(), extra.end());
    return keys;
  };

  Command train{app.add_subcommand("train", "cross-validated training with fold checkpoints")};
  register_keys(train, with({"epochs", "lr", "batch", "folds", "balance", "hidden1", "hidden2", "out"}));

  Command eval{app.add_subcommand("eval", "evaluate a checkpoint on a dataset")};
  register_keys(eval, {"dataset", "format", "checkpoint", "threads", "out"});

  Command extract{app.add_subcommand("extract", "write isomorphic features as CSV")};
  register_keys(extract, with({"checkpoint", "out"}));

  Command bench{app.add_subcommand("bench", "time feature extraction")};
  register_keys(bench, {"layers", "mode", "max-brute-k", "threads", "seed", "sweep", "k-values",
                        "c-values", "reps", "n", "count", "out"});
  bench.compare_flag = bench.app->add_flag("--compare-fast", bench.compare_fast,
                                           "pair brute and fast timings per kernel size");

  Command gen{app.add_subcommand("gen", "generate a planted-motif dataset")};
  register_keys(gen, {"motif", "n", "count", "seed", "out"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? isonn::app::kExitOk : isonn::app::kExitUsage;
  }

  try {
    if (train.app->parsed()) {
      isonn::app::cmd_train(resolve(train), std::cout);
    } else if (eval.app->parsed()) {
      isonn::app::cmd_eval(resolve(eval), std::cout);
    } else if (extract.app->parsed()) {
      isonn::app::cmd_extract(resolve(extract), std::cout);
    } else if (bench.app->parsed()) {
      isonn::app::cmd_bench(resolve(bench), std::cout);
    } else if (gen.app->parsed()) {
      isonn::app::cmd_gen(resolve(gen), std::cout);
    }
  } catch (const isonn::Error& e) {
    std::cerr << "isonn: " << e.what() << "\n";
    return isonn::app::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "isonn: " << e.what() << "\n";
    return isonn::app::kExitData;
  }
  return isonn::app::kExitOk;
}
