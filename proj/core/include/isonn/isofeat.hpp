// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

// Graph isomorphic feature extraction: kernel/window matching (exhaustive or
// spectral), min-pooling over permutations, softmax fusion, layer stacking,
// and the matching backward passes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "isonn/linalg.hpp"

namespace isonn {

enum class MatchMode { kBrute, kFast };
enum class SoftmaxAxis { kPerKernel, kAcrossKernels };

const char* to_string(MatchMode mode) noexcept;
const char* to_string(SoftmaxAxis axis) noexcept;

// Eigenvalue gaps below this break the distinct-spectrum premise of the
// spectral matcher; the match still runs but is flagged.
inline constexpr double kDegenerateGap = 1e-10;

/// A learnable k x k subgraph template.
class KernelVariable {
 public:
  KernelVariable() = default;
  explicit KernelVariable(DenseMatrix values);

  std::size_t size_k() const noexcept { return values_.rows(); }
  const DenseMatrix& values() const noexcept { return values_; }
  DenseMatrix& mutable_values() noexcept { return values_; }

 private:
  DenseMatrix values_;
};

struct LayerConfig {
  std::size_t size_k = 2;
  std::size_t channels_c = 1;
  MatchMode mode = MatchMode::kBrute;
  SoftmaxAxis softmax_axis = SoftmaxAxis::kPerKernel;
  std::size_t max_brute_k = kDefaultMaxBruteK;

  // Throws kConfig on k == 0, c == 0, or brute mode above max_brute_k.
  void validate() const;

  bool operator==(const LayerConfig&) const = default;
};

/// Per-permutation squared distances for one kernel over every window:
/// values(j, s, t), j indexing enumerate_permutations(k).
struct RawFeatureTensor {
  std::size_t perm_count = 0;
  std::size_t grid = 0;
  std::vector<double> values;

  double& at(std::size_t j, std::size_t s, std::size_t t) {
    return values[(j * grid + s) * grid + t];
  }
  double at(std::size_t j, std::size_t s, std::size_t t) const {
    return values[(j * grid + s) * grid + t];
  }
};

struct FeatureMap {
  std::size_t grid = 0;
  DenseMatrix values;                       // grid x grid
  std::vector<std::uint32_t> argmin_index;  // row-major grid x grid; brute only
};

/// Fused features Q, channel-major then row-major within a slice.
struct FeatureTensor {
  std::size_t channels = 0;
  std::size_t grid = 0;
  std::vector<double> values;

  FeatureTensor() = default;
  FeatureTensor(std::size_t channels, std::size_t grid, double fill = 0.0)
      : channels(channels), grid(grid), values(channels * grid * grid, fill) {}

  double& at(std::size_t c, std::size_t s, std::size_t t) {
    return values[(c * grid + s) * grid + t];
  }
  double at(std::size_t c, std::size_t s, std::size_t t) const {
    return values[(c * grid + s) * grid + t];
  }
  DenseMatrix slice(std::size_t c) const;
};

struct BruteMatch {
  double z = 0.0;
  Permutation best_perm;
  std::size_t best_index = 0;
  std::vector<double> raw;  // raw[j] for permutation j in lexicographic order
};

struct FastMatch {
  double z = 0.0;
  DenseMatrix p_star;  // |U_M| |U_K|^T: nonnegative, dense, not a permutation
  bool degenerate_spectrum = false;
};

DenseMatrix extract_submatrix(const DenseMatrix& a, std::size_t s,
                              std::size_t t, std::size_t k);

BruteMatch brute_match(const KernelVariable& kernel, const DenseMatrix& m,
                       std::size_t max_brute_k = kDefaultMaxBruteK);

/// Spectral matching on the symmetrized kernel and window.
FastMatch fast_match(const KernelVariable& kernel, const DenseMatrix& m);

/// Sum of squared differences of the descending spectra of sym(K) and
/// sym(M); no permutation can match below this.
double eigen_lower_bound(const KernelVariable& kernel, const DenseMatrix& m);

/// Exhaustive raw features of one kernel over all windows of `a`.
RawFeatureTensor compute_raw_features(const DenseMatrix& a,
                                      const KernelVariable& kernel,
                                      std::size_t max_brute_k = kDefaultMaxBruteK);

FeatureMap min_pool(const RawFeatureTensor& raw);

FeatureTensor softmax_normalize(std::span<const FeatureMap> maps,
                                SoftmaxAxis axis);

/// Lexicographic permutations of one size plus a flattened gather table:
/// gather[j * k * k + a * k + b] = pi_j(a) * k + pi_j(b).
struct PermutationTable {
  std::size_t k = 0;
  std::vector<Permutation> perms;
  std::vector<std::uint32_t> gather;
};

/// Shared, immutable table for size k; built once per process.
std::shared_ptr<const PermutationTable> permutation_table(
    std::size_t k, std::size_t max_brute_k = kDefaultMaxBruteK);

struct ExecOptions {
  std::size_t threads = 1;  // 1 keeps evaluation order fixed
};

/// What the backward pass needs from one forward_layer call.
struct LayerCache {
  LayerConfig config;
  DenseMatrix input;
  std::size_t kernel_count = 0;
  std::size_t grid = 0;
  FeatureTensor q;
  // brute: permutation index per (i, s, t); fast: k*k p_star per (i, s, t)
  std::vector<std::uint32_t> perm_index;
  std::shared_ptr<const PermutationTable> perms;
  std::vector<double> p_star;
  std::vector<DenseMatrix> sym_kernels;  // fast mode only
  std::size_t degenerate_windows = 0;
};

struct LayerForward {
  FeatureTensor q;
  std::vector<FeatureMap> maps;
  LayerCache cache;
};

LayerForward forward_layer(const DenseMatrix& a,
                           std::span<const KernelVariable> kernels,
                           const LayerConfig& config,
                           const ExecOptions& exec = {});

struct LayerGradients {
  std::vector<DenseMatrix> kernels;
  DenseMatrix input;  // empty unless requested
};

/// Backpropagates dL/dQ through softmax, min-pool (straight through the
/// selected permutation or the frozen p_star) and the matching distances.
LayerGradients backward_layer(const FeatureTensor& grad_q,
                              const LayerCache& cache,
                              std::span<const KernelVariable> kernels,
                              const LayerConfig& config,
                              bool need_input_grad = false);

struct IsoLayer {
  std::vector<KernelVariable> kernels;
  LayerConfig config;
};

// cache[l][u] is layer l applied to input slice u.
struct StackCache {
  std::vector<std::vector<LayerCache>> layers;
};

struct StackForward {
  FeatureTensor q;
  StackCache cache;
};

/// Output shape of a layer stack on an n-node input: {channels, grid}.
/// Throws kDomain naming the first layer whose kernel outgrows the grid.
std::pair<std::size_t, std::size_t> stack_output_shape(
    std::size_t n, std::span<const IsoLayer> layers);

/// Layer l+1 applies each of its kernels to every channel slice of layer
/// l's output; slice u with kernel i lands in channel u * c + i.
StackForward forward_stack(const DenseMatrix& a,
                           std::span<const IsoLayer> layers,
                           const ExecOptions& exec = {});

std::vector<std::vector<DenseMatrix>> backward_stack(
    const FeatureTensor& grad_q, const StackCache& cache,
    std::span<const IsoLayer> layers);

}  // namespace isonn
