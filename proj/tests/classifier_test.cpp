// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "isonn/classifier.hpp"
#include "isonn/error.hpp"
#include "support/generators.hpp"

namespace isonn {
namespace {

namespace fs = std::filesystem;
using testing::random_adjacency;

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

ModelSpec reduced_spec(std::size_t n = 8, std::size_t k = 2, std::size_t c = 1) {
  ModelSpec spec;
  spec.input_size = n;
  LayerConfig lc;
  lc.size_k = k;
  lc.channels_c = c;
  spec.layers = {lc};
  spec.hidden1 = 8;
  spec.hidden2 = 4;
  return spec;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("isonn_classifier_" + name);
}

TEST(MakeModel, ShapesAndInitialization) {
  ModelSpec spec;
  spec.input_size = 10;
  LayerConfig lc;
  lc.size_k = 3;
  lc.channels_c = 2;
  spec.layers = {lc};
  const auto model = make_model(spec, 1);
  EXPECT_EQ(model.mlp.d_in(), 2u * 8u * 8u);
  EXPECT_EQ(model.mlp.hidden1(), 1024u);
  EXPECT_EQ(model.mlp.hidden2(), 128u);
  EXPECT_EQ(model.mlp.w3.cols(), 2u);
  for (const auto& k : model.layers[0].kernels) {
    for (double x : k.values().data()) EXPECT_TRUE(x >= 0.0 && x < 1.0);
  }
  for (double b : model.mlp.b1) EXPECT_EQ(b, 0.0);
  const double bound = std::sqrt(6.0 / (128.0 + 1024.0)) + 1e-15;
  for (double w : model.mlp.w1.data()) EXPECT_LE(std::abs(w), bound);
  EXPECT_NO_THROW(model.validate());

  const auto again = make_model(spec, 1);
  EXPECT_EQ(again.mlp.w2, model.mlp.w2);
  EXPECT_NE(make_model(spec, 2).mlp.w2, model.mlp.w2);
}

TEST(MakeModel, PreActivationVarianceBand) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t n : {10u, 28u}) {
    ModelSpec spec;
    spec.input_size = n;
    spec.layers = {LayerConfig{}};
    spec.layers[0].size_k = 3;
    const auto model = make_model(spec, 3);
    for (const DenseMatrix* w : {&model.mlp.w1, &model.mlp.w2}) {
      double sum = 0.0, sq = 0.0;
      const std::size_t samples = 200;
      for (std::size_t s = 0; s < samples; ++s) {
        std::vector<double> x(w->rows());
        for (double& v : x) v = unit(rng);
        for (std::size_t j = 0; j < w->cols(); ++j) {
          double pre = 0.0;
          for (std::size_t i = 0; i < w->rows(); ++i) pre += x[i] * (*w)(i, j);
          sum += pre;
          sq += pre * pre;
        }
      }
      const double count = static_cast<double>(samples * w->cols());
      const double var = sq / count - (sum / count) * (sum / count);
      EXPECT_GE(var, 0.1);
      EXPECT_LE(var, 10.0);
    }
  }
}

TEST(MakeModel, Errors) {
  ModelSpec spec = reduced_spec();
  spec.layers.clear();
  EXPECT_EQ(kind_of([&] { make_model(spec, 0); }), ErrorKind::kConfig);
  spec = reduced_spec(3, 4);
  EXPECT_EQ(kind_of([&] { make_model(spec, 0); }), ErrorKind::kDomain);
}

TEST(OneHot, Encoding) {
  EXPECT_EQ(one_hot(1), (Probabilities{1.0, 0.0}));
  EXPECT_EQ(one_hot(-1), (Probabilities{0.0, 1.0}));
  EXPECT_EQ(kind_of([] { one_hot(0); }), ErrorKind::kDomain);
}

TEST(Flatten, LayoutAndRoundTrip) {
  FeatureTensor single(1, 1, 0.25);
  EXPECT_EQ(flatten(single), (std::vector<double>{0.25}));

  FeatureTensor q(2, 2);
  double v = 0.0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t t = 0; t < 2; ++t) q.at(c, s, t) = v++;
  EXPECT_EQ(flatten(q), (std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7}));
  const auto back = unflatten(flatten(q), 2, 2);
  EXPECT_EQ(back.values, q.values);
  EXPECT_EQ(kind_of([] { unflatten(std::vector<double>(5), 2, 2); }), ErrorKind::kDimension);
}

TEST(ForwardMlp, Examples) {
  const auto zero = MLPParams::zeros(4, 3, 2);
  const std::vector<double> q{0.1, 0.2, 0.3, 0.4};
  const auto out = forward_mlp(zero, q);
  EXPECT_EQ(out.y_hat, (Probabilities{0.5, 0.5}));

  auto model = make_model(reduced_spec(), 4);
  std::mt19937_64 rng(4);
  const auto qv = testing::random_matrix(1, model.mlp.d_in(), rng, 0.0, 1.0).entries();
  const auto y = forward_mlp(model.mlp, qv).y_hat;
  EXPECT_NEAR(y[0] + y[1], 1.0, 1e-9);

  auto neg = model.mlp;
  for (double& w : neg.w1.data()) w = -std::abs(w) - 0.1;
  const auto dead = forward_mlp(neg, qv);
  for (double d : dead.cache.d1) EXPECT_EQ(d, 0.0);

  EXPECT_EQ(kind_of([&] { forward_mlp(model.mlp, std::vector<double>(3)); }), ErrorKind::kDimension);
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy({1.0 - 1e-12, 1e-12}, {1.0, 0.0}), 0.0, 1e-11);
  EXPECT_NEAR(cross_entropy({0.5, 0.5}, {1.0, 0.0}), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy({0.5, 0.5}, {0.0, 1.0}), 0.6931, 1e-4);
  EXPECT_NEAR(cross_entropy({1.0, 0.0}, {0.0, 1.0}), -std::log(1e-12), 1e-9);
  EXPECT_EQ(kind_of([] { cross_entropy({0.5, 0.5}, {0.5, 0.5}); }), ErrorKind::kDomain);
}

TEST(Backward, OutputBiasGradientIsPredictionMinusTarget) {
  const auto model = make_model(reduced_spec(), 6);
  std::mt19937_64 rng(6);
  const auto g = make_graph(random_adjacency(8, 0.4, rng), -1);
  const auto lg = loss_and_gradients(model, g);
  const auto y = one_hot(-1);
  EXPECT_NEAR(lg.grads.mlp.b3[0], lg.y_hat[0] - y[0], 1e-15);
  EXPECT_NEAR(lg.grads.mlp.b3[1], lg.y_hat[1] - y[1], 1e-15);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const auto model = make_model(reduced_spec(), 7);
  std::mt19937_64 rng(7);
  const auto fwd = forward_full(model, random_adjacency(8, 0.4, rng));
  std::vector<double> gq;
  const auto g = backward_mlp(model.mlp, fwd.mlp.cache, {0.0, 0.0}, &gq);
  for (const auto* m : {&g.w1, &g.w2, &g.w3}) {
    for (double x : m->data()) EXPECT_EQ(x, 0.0);
  }
  for (double x : gq) EXPECT_EQ(x, 0.0);
}

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

TEST(Backward, EveryParameterMatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto model = make_model(reduced_spec(), 100 + seed);
    std::mt19937_64 rng(seed);
    const auto graph = make_graph(random_adjacency(8, 0.4, rng), seed % 2 ? 1 : -1);
    const auto analytic = loss_and_gradients(model, graph).grads;
    const auto grads = gradient_spans(analytic);
    auto params = parameter_spans(model);
    ASSERT_EQ(grads.size(), params.size());
    const double h = 1e-5;
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t e = 0; e < params[t].size(); ++e) {
        const double orig = params[t][e];
        params[t][e] = orig + h;
        const double up = loss_and_gradients(model, graph).loss;
        params[t][e] = orig - h;
        const double down = loss_and_gradients(model, graph).loss;
        params[t][e] = orig;
        EXPECT_LE(rel_err(grads[t][e], (up - down) / (2 * h)), 1e-4)
            << "seed " << seed << " tensor " << t << " entry " << e;
      }
    }
  }
}

TEST(AdamStep, ZeroGradientLeavesParametersUnchanged) {
  auto model = make_model(reduced_spec(), 8);
  const auto before = model.mlp.w1;
  AdamState state;
  adam_step(model, ModelGradients::zeros_like(model), state, TrainConfig{});
  EXPECT_EQ(model.mlp.w1, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(AdamStep, FirstStepIsSignLike) {
  std::vector<double> p{1.0, 1.0, 1.0};
  const std::vector<double> g{0.5, -3.0, 1e-3};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  AdamState state;
  TrainConfig cfg;
  adam_step(ps, gs, state, cfg);
  // m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], 1.0 - cfg.learning_rate * g[i] / (std::abs(g[i]) + cfg.adam_eps), 1e-15);
  }
  EXPECT_DOUBLE_EQ(cfg.learning_rate, 0.001);
}

TEST(AdamStep, ShapeMismatch) {
  std::vector<double> p(3), g(2);
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  AdamState state;
  EXPECT_EQ(kind_of([&] { adam_step(ps, gs, state, TrainConfig{}); }), ErrorKind::kDimension);
}

TEST(ForwardFull, PaddedSizeMismatchNamesBothSizes) {
  const auto model = make_model(reduced_spec(), 9);
  try {
    forward_full(model, DenseMatrix(9, 9));
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
    const std::string msg = e.what();
    EXPECT_NE(msg.find('8'), std::string::npos) << msg;
    EXPECT_NE(msg.find('9'), std::string::npos) << msg;
  }
}

TEST(Train, OneEpochReducesSingleSampleLoss) {
  auto model = make_model(reduced_spec(), 10);
  std::mt19937_64 rng(10);
  const std::vector<GraphInstance> one{make_graph(random_adjacency(8, 0.4, rng), 1)};
  const double before = loss_and_gradients(model, one[0]).loss;
  TrainConfig cfg;
  cfg.epochs = 1;
  train(model, one, cfg);
  EXPECT_LT(loss_and_gradients(model, one[0]).loss, before);
}

TEST(Train, DeterministicAndFinite) {
  const auto ds = gen_synthetic(12, 8, motif_by_name("clique3"), 11);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 4;
  auto a = make_model(reduced_spec(), 11);
  auto b = a;
  const auto ra = train(a, ds.graphs, cfg);
  const auto rb = train(b, ds.graphs, cfg);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_EQ(a.mlp.w1, b.mlp.w1);
  EXPECT_EQ(a.layers[0].kernels[0].values(), b.layers[0].kernels[0].values());
  for (double l : ra.epoch_loss) EXPECT_TRUE(std::isfinite(l));
}

TEST(Train, ThreadedGradientsAgreeWithSerial) {
  const auto ds = gen_synthetic(12, 8, motif_by_name("clique3"), 12);
  TrainConfig cfg;
  cfg.epochs = 3;
  auto a = make_model(reduced_spec(), 12);
  auto b = a;
  const auto ra = train(a, ds.graphs, cfg);
  const auto rb = train(b, ds.graphs, cfg, ExecOptions{3});
  ASSERT_EQ(ra.epoch_loss.size(), rb.epoch_loss.size());
  for (std::size_t e = 0; e < ra.epoch_loss.size(); ++e) {
    EXPECT_NEAR(ra.epoch_loss[e], rb.epoch_loss[e], 1e-9 * ra.epoch_loss[e]);
  }
}

TEST(Train, EmptyTrainingSet) {
  auto model = make_model(reduced_spec(), 13);
  EXPECT_EQ(kind_of([&] { train(model, std::vector<GraphInstance>{}, TrainConfig{}); }),
            ErrorKind::kDomain);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::kConfig);
}

TEST(Train, PlantedMotifReachesHighTrainingAccuracy) {
  const auto ds = gen_synthetic(100, 10, motif_by_name("clique3"), 14);
  ModelSpec spec;
  spec.input_size = 10;
  spec.layers = {LayerConfig{}};
  spec.layers[0].size_k = 3;
  auto model = make_model(spec, 14);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 14;
  train(model, ds.graphs, cfg);
  std::vector<int> preds, labels;
  for (const auto& g : ds.graphs) {
    preds.push_back(predict(model, g.adjacency));
    labels.push_back(g.label);
  }
  EXPECT_GE(metrics(preds, labels).accuracy, 0.95);
}

TEST(Checkpoint, RoundTrip) {
  ModelSpec spec = reduced_spec(9, 3, 2);
  LayerConfig second;
  second.size_k = 2;
  second.channels_c = 2;
  second.mode = MatchMode::kFast;
  second.softmax_axis = SoftmaxAxis::kAcrossKernels;
  spec.layers.push_back(second);
  const auto model = make_model(spec, 15);
  const auto path = temp_path("roundtrip.ckpt");
  save_checkpoint(path.string(), model);
  const auto back = load_checkpoint(path.string());
  EXPECT_EQ(back.input_size, model.input_size);
  ASSERT_EQ(back.layers.size(), model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    EXPECT_EQ(back.layers[l].config, model.layers[l].config);
    for (std::size_t i = 0; i < model.layers[l].kernels.size(); ++i) {
      EXPECT_EQ(back.layers[l].kernels[i].values(), model.layers[l].kernels[i].values());
    }
  }
  EXPECT_EQ(back.mlp.w1, model.mlp.w1);
  EXPECT_EQ(back.mlp.b2, model.mlp.b2);
  EXPECT_EQ(back.mlp.w3, model.mlp.w3);

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::string(magic, 8), "ISONNCKP");
  fs::remove(path);
}

TEST(Checkpoint, RejectsBadFiles) {
  EXPECT_EQ(kind_of([] { load_checkpoint(temp_path("missing.ckpt").string()); }), ErrorKind::kIo);

  const auto junk = temp_path("junk.ckpt");
  std::ofstream(junk, std::ios::binary) << "not a checkpoint at all";
  EXPECT_EQ(kind_of([&] { load_checkpoint(junk.string()); }), ErrorKind::kParse);

  const auto model = make_model(reduced_spec(), 16);
  const auto good = temp_path("truncated.ckpt");
  save_checkpoint(good.string(), model);
  fs::resize_file(good, fs::file_size(good) - 8);
  EXPECT_EQ(kind_of([&] { load_checkpoint(good.string()); }), ErrorKind::kParse);
  fs::remove(junk);
  fs::remove(good);
}

}  // namespace
}  // namespace isonn
