// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "isonn/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <thread>

#include "isonn/error.hpp"

namespace isonn {

namespace {

constexpr double kLogFloor = 1e-12;

DenseMatrix xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseMatrix w(fan_in, fan_out);
  for (double& x : w.data()) x = dist(rng);
  return w;
}

// y += x^T W for W (rows = x.size()) row-major.
void accumulate_xw(std::span<const double> x, const DenseMatrix& w, std::span<double> y) {
  const std::size_t cols = w.cols();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = w.data().data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] += xi * row[j];
  }
}

// G += x y^T; gx = W y (both length-matched to W's rows).
void outer_backward(std::span<const double> x, std::span<const double> gy, const DenseMatrix& w,
                    DenseMatrix& gw, std::vector<double>* gx) {
  const std::size_t cols = w.cols();
  if (gx) gx->assign(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    double* grow = gw.data().data() + i * cols;
    if (xi != 0.0) {
      for (std::size_t j = 0; j < cols; ++j) grow[j] += xi * gy[j];
    }
    if (gx) {
      const double* row = w.data().data() + i * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j] * gy[j];
      (*gx)[i] = acc;
    }
  }
}

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void accumulate_mlp_backward(const MLPParams& p, const MlpCache& cache,
                             const Probabilities& grad_logits, MLPParams& g,
                             std::vector<double>* grad_q) {
  for (std::size_t o = 0; o < 2; ++o) g.b3[o] += grad_logits[o];
  std::vector<double> gd2;
  outer_backward(cache.d2, grad_logits, p.w3, g.w3, &gd2);
  for (std::size_t h = 0; h < gd2.size(); ++h) {
    if (cache.d2[h] <= 0.0) gd2[h] = 0.0;
    g.b2[h] += gd2[h];
  }
  std::vector<double> gd1;
  outer_backward(cache.d1, gd2, p.w2, g.w2, &gd1);
  for (std::size_t h = 0; h < gd1.size(); ++h) {
    if (cache.d1[h] <= 0.0) gd1[h] = 0.0;
    g.b1[h] += gd1[h];
  }
  outer_backward(cache.q, gd1, p.w1, g.w1, grad_q);
}

void accumulate_full_backward(const ModelParams& model, const SampleForward& fwd,
                              const Probabilities& y, ModelGradients& into) {
  const Probabilities grad_logits{fwd.mlp.y_hat[0] - y[0], fwd.mlp.y_hat[1] - y[1]};
  std::vector<double> grad_q;
  accumulate_mlp_backward(model.mlp, fwd.mlp.cache, grad_logits, into.mlp, &grad_q);
  const FeatureTensor gq = unflatten(grad_q, fwd.stack.q.channels, fwd.stack.q.grid);
  const auto kg = backward_stack(gq, fwd.stack.cache, model.layers);
  for (std::size_t l = 0; l < kg.size(); ++l) {
    for (std::size_t i = 0; i < kg[l].size(); ++i) add_into(into.kernels[l][i].data(), kg[l][i].data());
  }
}

std::vector<std::span<double>> mutable_spans(ModelGradients& g) {
  std::vector<std::span<double>> out;
  for (auto& layer : g.kernels) {
    for (auto& k : layer) out.push_back(k.data());
  }
  out.push_back(g.mlp.w1.data());
  out.push_back(g.mlp.b1);
  out.push_back(g.mlp.w2.data());
  out.push_back(g.mlp.b2);
  out.push_back(g.mlp.w3.data());
  out.push_back(g.mlp.b3);
  return out;
}

void zero(ModelGradients& g) {
  for (auto s : mutable_spans(g)) std::fill(s.begin(), s.end(), 0.0);
}

}  // namespace

MLPParams MLPParams::zeros(std::size_t d_in, std::size_t h1, std::size_t h2) {
  MLPParams p;
  p.w1 = DenseMatrix(d_in, h1);
  p.w2 = DenseMatrix(h1, h2);
  p.w3 = DenseMatrix(h2, 2);
  p.b1.assign(h1, 0.0);
  p.b2.assign(h2, 0.0);
  p.b3.assign(2, 0.0);
  return p;
}

void ModelParams::validate() const {
  const auto [channels, grid] = stack_output_shape(input_size, layers);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    layer.config.validate();
    if (layer.kernels.size() != layer.config.channels_c) {
      fail(ErrorKind::kDimension, "layer " + std::to_string(l) + " kernel count mismatch");
    }
    for (const auto& k : layer.kernels) {
      if (k.size_k() != layer.config.size_k) {
        fail(ErrorKind::kDimension, "layer " + std::to_string(l) + " kernel size mismatch");
      }
    }
  }
  const std::size_t d_in = channels * grid * grid;
  if (mlp.d_in() != d_in) {
    fail(ErrorKind::kDimension, "classifier expects " + std::to_string(mlp.d_in()) +
                                    " features but the layer stack yields " + std::to_string(d_in));
  }
  if (mlp.w2.rows() != mlp.hidden1() || mlp.w3.rows() != mlp.hidden2() || mlp.w3.cols() != 2 ||
      mlp.b1.size() != mlp.hidden1() || mlp.b2.size() != mlp.hidden2() || mlp.b3.size() != 2) {
    fail(ErrorKind::kDimension, "classifier layer shapes are inconsistent");
  }
}

ModelParams make_model(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.layers.empty()) fail(ErrorKind::kConfig, "model needs at least one isomorphic layer");
  if (spec.hidden1 == 0 || spec.hidden2 == 0) fail(ErrorKind::kConfig, "hidden widths must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ModelParams model;
  model.input_size = spec.input_size;
  for (const auto& cfg : spec.layers) {
    cfg.validate();
    IsoLayer layer;
    layer.config = cfg;
    for (std::size_t i = 0; i < cfg.channels_c; ++i) {
      DenseMatrix v(cfg.size_k, cfg.size_k);
      for (double& x : v.data()) x = unit(rng);
      layer.kernels.emplace_back(std::move(v));
    }
    model.layers.push_back(std::move(layer));
  }
  const auto [channels, grid] = stack_output_shape(spec.input_size, model.layers);
  const std::size_t d_in = channels * grid * grid;
  model.mlp = MLPParams::zeros(d_in, spec.hidden1, spec.hidden2);
  model.mlp.w1 = xavier(d_in, spec.hidden1, rng);
  model.mlp.w2 = xavier(spec.hidden1, spec.hidden2, rng);
  model.mlp.w3 = xavier(spec.hidden2, 2, rng);
  return model;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::kConfig, "learning rate must be > 0");
  if (epochs < 1) fail(ErrorKind::kConfig, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::kConfig, "batch size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorKind::kConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail(ErrorKind::kConfig, "Adam epsilon must be > 0");
}

Probabilities one_hot(int label) {
  if (label == 1) return {1.0, 0.0};
  if (label == -1) return {0.0, 1.0};
  fail(ErrorKind::kDomain, "label must be +1 or -1");
}

std::vector<double> flatten(const FeatureTensor& q) { return q.values; }

FeatureTensor unflatten(std::span<const double> v, std::size_t channels, std::size_t grid) {
  if (v.size() != channels * grid * grid) {
    fail(ErrorKind::kDimension, "vector length does not match tensor shape");
  }
  FeatureTensor q(channels, grid);
  std::copy(v.begin(), v.end(), q.values.begin());
  return q;
}

MlpForward forward_mlp(const MLPParams& params, std::span<const double> q_vec) {
  if (q_vec.size() != params.d_in()) {
    fail(ErrorKind::kDimension, "classifier input has length " + std::to_string(q_vec.size()) +
                                    ", expected " + std::to_string(params.d_in()));
  }
  MlpForward out;
  MlpCache& c = out.cache;
  c.q.assign(q_vec.begin(), q_vec.end());
  c.d1 = params.b1;
  accumulate_xw(c.q, params.w1, c.d1);
  for (double& x : c.d1) x = std::max(x, 0.0);
  c.d2 = params.b2;
  accumulate_xw(c.d1, params.w2, c.d2);
  for (double& x : c.d2) x = std::max(x, 0.0);
  std::vector<double> logits = params.b3;
  accumulate_xw(c.d2, params.w3, logits);
  const double top = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - top), e1 = std::exp(logits[1] - top);
  out.y_hat = {e0 / (e0 + e1), e1 / (e0 + e1)};
  c.y_hat = out.y_hat;
  return out;
}

double cross_entropy(const Probabilities& y_hat, const Probabilities& y) {
  const bool hot = (y[0] == 1.0 && y[1] == 0.0) || (y[0] == 0.0 && y[1] == 1.0);
  if (!hot) fail(ErrorKind::kDomain, "target is not one-hot");
  double loss = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    if (y[j] != 0.0) loss -= y[j] * std::log(std::max(y_hat[j], kLogFloor));
  }
  return loss;
}

ModelGradients ModelGradients::zeros_like(const ModelParams& model) {
  ModelGradients g;
  for (const auto& layer : model.layers) {
    auto& ks = g.kernels.emplace_back();
    for (const auto& k : layer.kernels) ks.emplace_back(k.size_k(), k.size_k());
  }
  g.mlp = MLPParams::zeros(model.mlp.d_in(), model.mlp.hidden1(), model.mlp.hidden2());
  return g;
}

void ModelGradients::accumulate(const ModelGradients& other) {
  auto dst = mutable_spans(*this);
  const auto src = gradient_spans(other);
  if (dst.size() != src.size()) fail(ErrorKind::kDimension, "gradient structures differ");
  for (std::size_t t = 0; t < dst.size(); ++t) {
    if (dst[t].size() != src[t].size()) fail(ErrorKind::kDimension, "gradient shapes differ");
    add_into(dst[t], src[t]);
  }
}

void ModelGradients::scale(double factor) {
  for (auto s : mutable_spans(*this)) {
    for (double& x : s) x *= factor;
  }
}

SampleForward forward_full(const ModelParams& model, const DenseMatrix& adjacency,
                           const ExecOptions& exec) {
  if (adjacency.rows() != model.input_size) {
    fail(ErrorKind::kDimension, "model expects padded size " + std::to_string(model.input_size) +
                                    ", graph has " + std::to_string(adjacency.rows()) + " nodes");
  }
  SampleForward out;
  out.stack = forward_stack(adjacency, model.layers, exec);
  out.mlp = forward_mlp(model.mlp, out.stack.q.values);
  return out;
}

MLPParams backward_mlp(const MLPParams& params, const MlpCache& cache,
                       const Probabilities& grad_logits, std::vector<double>* grad_q) {
  if (cache.q.size() != params.d_in() || cache.d1.size() != params.hidden1() ||
      cache.d2.size() != params.hidden2()) {
    fail(ErrorKind::kState, "classifier cache does not match parameters");
  }
  MLPParams g = MLPParams::zeros(params.d_in(), params.hidden1(), params.hidden2());
  accumulate_mlp_backward(params, cache, grad_logits, g, grad_q);
  return g;
}

ModelGradients backward_full(const ModelParams& model, const SampleForward& forward,
                             const Probabilities& y) {
  if (forward.stack.cache.layers.size() != model.layers.size() ||
      forward.mlp.cache.q.size() != model.mlp.d_in()) {
    fail(ErrorKind::kState, "forward cache is missing or belongs to another model");
  }
  ModelGradients g = ModelGradients::zeros_like(model);
  accumulate_full_backward(model, forward, y, g);
  return g;
}

LossAndGradients loss_and_gradients(const ModelParams& model, const GraphInstance& graph,
                                    const ExecOptions& exec) {
  const SampleForward fwd = forward_full(model, graph.adjacency, exec);
  const Probabilities y = one_hot(graph.label);
  LossAndGradients out;
  out.y_hat = fwd.mlp.y_hat;
  out.loss = cross_entropy(fwd.mlp.y_hat, y);
  out.grads = backward_full(model, fwd, y);
  return out;
}

std::vector<std::span<double>> parameter_spans(ModelParams& model) {
  std::vector<std::span<double>> out;
  for (auto& layer : model.layers) {
    for (auto& k : layer.kernels) out.push_back(k.mutable_values().data());
  }
  out.push_back(model.mlp.w1.data());
  out.push_back(model.mlp.b1);
  out.push_back(model.mlp.w2.data());
  out.push_back(model.mlp.b2);
  out.push_back(model.mlp.w3.data());
  out.push_back(model.mlp.b3);
  return out;
}

std::vector<std::span<const double>> gradient_spans(const ModelGradients& grads) {
  std::vector<std::span<const double>> out;
  for (const auto& layer : grads.kernels) {
    for (const auto& k : layer) out.push_back(k.data());
  }
  out.push_back(grads.mlp.w1.data());
  out.push_back(grads.mlp.b1);
  out.push_back(grads.mlp.w2.data());
  out.push_back(grads.mlp.b2);
  out.push_back(grads.mlp.w3.data());
  out.push_back(grads.mlp.b3);
  return out;
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const TrainConfig& config) {
  if (params.size() != grads.size()) fail(ErrorKind::kDimension, "parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) fail(ErrorKind::kState, "Adam state tracks another model");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size() != grads[t].size() || state.m[t].size() != params[t].size()) {
      fail(ErrorKind::kDimension, "parameter/gradient shape mismatch in tensor " + std::to_string(t));
    }
  }
  ++state.step;
  const double b1 = config.adam_beta1, b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    double* p = params[t].data();
    const double* g = grads[t].data();
    double* m = state.m[t].data();
    double* v = state.v[t].data();
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
    }
  }
}

void adam_step(ModelParams& model, const ModelGradients& grads, AdamState& state,
               const TrainConfig& config) {
  const auto p = parameter_spans(model);
  const auto g = gradient_spans(grads);
  adam_step(std::span<const std::span<double>>(p), std::span<const std::span<const double>>(g),
            state, config);
}

TrainResult train(ModelParams& model, std::span<const GraphInstance> train_set,
                  const TrainConfig& config, const ExecOptions& exec) {
  config.validate();
  model.validate();
  if (train_set.empty()) fail(ErrorKind::kDomain, "training set is empty");

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState adam;
  ModelGradients grads = ModelGradients::zeros_like(model);

  const std::size_t workers = std::max<std::size_t>(1, exec.threads);
  std::vector<ModelGradients> partial;
  if (workers > 1) partial.assign(workers, ModelGradients::zeros_like(model));
  const ExecOptions inner{1};

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      zero(grads);
      if (workers == 1) {
        for (std::size_t b = start; b < end; ++b) {
          const GraphInstance& g = train_set[order[b]];
          const SampleForward fwd = forward_full(model, g.adjacency, inner);
          const Probabilities y = one_hot(g.label);
          epoch_loss += cross_entropy(fwd.mlp.y_hat, y);
          accumulate_full_backward(model, fwd, y, grads);
        }
      } else {
        std::vector<double> losses(end - start, 0.0);
        std::vector<std::exception_ptr> errors(workers);
        {
          std::vector<std::jthread> pool;
          for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
              try {
                zero(partial[w]);
                for (std::size_t b = start + w; b < end; b += workers) {
                  const GraphInstance& g = train_set[order[b]];
                  const SampleForward fwd = forward_full(model, g.adjacency, inner);
                  const Probabilities y = one_hot(g.label);
                  losses[b - start] = cross_entropy(fwd.mlp.y_hat, y);
                  accumulate_full_backward(model, fwd, y, partial[w]);
                }
              } catch (...) {
                errors[w] = std::current_exception();
              }
            });
          }
        }
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
        for (auto& p : partial) grads.accumulate(p);
        for (double l : losses) epoch_loss += l;
      }
      adam_step(model, grads, adam, config);
    }
    if (!std::isfinite(epoch_loss)) {
      throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch + 1),
                           epoch_loss);
    }
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

Probabilities predict_proba(const ModelParams& model, const DenseMatrix& adjacency,
                            const ExecOptions& exec) {
  return forward_full(model, adjacency, exec).mlp.y_hat;
}

int predict(const ModelParams& model, const DenseMatrix& adjacency, const ExecOptions& exec) {
  const Probabilities p = predict_proba(model, adjacency, exec);
  return p[0] >= p[1] ? 1 : -1;
}

}  // namespace isonn
