// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isonn/data.hpp"
#include "isonn/isofeat.hpp"
#include "isonn/linalg.hpp"

namespace isonn {

inline constexpr std::size_t kDefaultHidden1 = 1024;
inline constexpr std::size_t kDefaultHidden2 = 128;

/// Three fully connected layers. Weights are stored input-major:
/// w1 is d_in x h1, w2 is h1 x h2, w3 is h2 x 2.
struct MLPParams {
  DenseMatrix w1, w2, w3;
  std::vector<double> b1, b2, b3;

  std::size_t d_in() const noexcept { return w1.rows(); }
  std::size_t hidden1() const noexcept { return w1.cols(); }
  std::size_t hidden2() const noexcept { return w2.cols(); }

  static MLPParams zeros(std::size_t d_in, std::size_t h1, std::size_t h2);
};

struct ModelParams {
  std::size_t input_size = 0;  // padded node count the stack was built for
  std::vector<IsoLayer> layers;
  MLPParams mlp;

  // Throws kDimension if the layer chain does not produce mlp.d_in features.
  void validate() const;
};

struct ModelSpec {
  std::size_t input_size = 0;
  std::vector<LayerConfig> layers;
  std::size_t hidden1 = kDefaultHidden1;
  std::size_t hidden2 = kDefaultHidden2;
};

/// Kernels uniform in [0, 1); dense weights uniform in
/// +-sqrt(6 / (fan_in + fan_out)); biases zero.
ModelParams make_model(const ModelSpec& spec, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 150;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

using Probabilities = std::array<double, 2>;

// +1 -> (1, 0), -1 -> (0, 1).
Probabilities one_hot(int label);

std::vector<double> flatten(const FeatureTensor& q);
FeatureTensor unflatten(std::span<const double> v, std::size_t channels, std::size_t grid);

struct MlpCache {
  std::vector<double> q, d1, d2;  // inputs and post-relu activations
  Probabilities y_hat{};
};

struct MlpForward {
  Probabilities y_hat{};
  MlpCache cache;
};

/// relu(W1 q + b1) -> relu(W2 d1 + b2) -> softmax(W3 d2 + b3).
MlpForward forward_mlp(const MLPParams& params, std::span<const double> q_vec);

/// -sum_j y_j log(max(y_hat_j, 1e-12)); y must be one-hot.
double cross_entropy(const Probabilities& y_hat, const Probabilities& y);

struct ModelGradients {
  std::vector<std::vector<DenseMatrix>> kernels;  // [layer][kernel]
  MLPParams mlp;

  static ModelGradients zeros_like(const ModelParams& model);
  void accumulate(const ModelGradients& other);
  void scale(double factor);
};

struct SampleForward {
  StackForward stack;
  MlpForward mlp;
};

SampleForward forward_full(const ModelParams& model, const DenseMatrix& adjacency,
                           const ExecOptions& exec = {});

/// Output-layer upstream gradient dL/dlogits and the MLP backward, returning
/// dL/dq alongside the parameter gradients.
MLPParams backward_mlp(const MLPParams& params, const MlpCache& cache,
                       const Probabilities& grad_logits, std::vector<double>* grad_q);

/// Exact reverse-mode gradients of the cross-entropy of one sample.
ModelGradients backward_full(const ModelParams& model, const SampleForward& forward,
                             const Probabilities& y);

struct LossAndGradients {
  double loss = 0.0;
  Probabilities y_hat{};
  ModelGradients grads;
};

LossAndGradients loss_and_gradients(const ModelParams& model, const GraphInstance& graph,
                                    const ExecOptions& exec = {});

/// Adam moments for every parameter tensor, in parameter_spans order.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;
};

std::vector<std::span<double>> parameter_spans(ModelParams& model);
std::vector<std::span<const double>> gradient_spans(const ModelGradients& grads);

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const TrainConfig& config);

void adam_step(ModelParams& model, const ModelGradients& grads, AdamState& state,
               const TrainConfig& config);

struct TrainResult {
  std::vector<double> epoch_loss;  // summed cross-entropy over each epoch
};

/// Minibatch Adam over the training graphs. Batch loss is the sum over its
/// samples. Deterministic for a fixed seed when exec.threads == 1.
TrainResult train(ModelParams& model, std::span<const GraphInstance> train_set,
                  const TrainConfig& config, const ExecOptions& exec = {});

Probabilities predict_proba(const ModelParams& model, const DenseMatrix& adjacency,
                            const ExecOptions& exec = {});
int predict(const ModelParams& model, const DenseMatrix& adjacency,
            const ExecOptions& exec = {});

// Binary checkpoint: magic "ISONNCKP", u32 version, u64 header length, a JSON
// header naming every tensor and its shape, then the tensors as little-endian
// float64 in header order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelParams& model);
ModelParams load_checkpoint(const std::string& path);

}  // namespace isonn
