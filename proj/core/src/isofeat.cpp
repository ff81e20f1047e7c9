// Copyright 2026 The IsoNN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "isonn/isofeat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include "isonn/error.hpp"
#include "linalg_kernels.hpp"

namespace isonn {

const char* to_string(MatchMode mode) noexcept {
  return mode == MatchMode::kBrute ? "brute" : "fast";
}

const char* to_string(SoftmaxAxis axis) noexcept {
  return axis == SoftmaxAxis::kPerKernel ? "per-kernel" : "across-kernels";
}

KernelVariable::KernelVariable(DenseMatrix values) : values_(std::move(values)) {
  if (!values_.is_square() || values_.rows() == 0) {
    fail(ErrorKind::kDimension, "kernel must be a non-empty square matrix");
  }
  if (!all_finite(values_)) fail(ErrorKind::kDomain, "kernel has non-finite entries");
}

void LayerConfig::validate() const {
  if (size_k == 0) fail(ErrorKind::kConfig, "kernel size k must be >= 1");
  if (channels_c == 0) fail(ErrorKind::kConfig, "channel count c must be >= 1");
  if (mode == MatchMode::kBrute && size_k > max_brute_k) {
    fail(ErrorKind::kConfig, "brute mode with k = " + std::to_string(size_k) +
                                 " exceeds max_brute_k = " +
                                 std::to_string(max_brute_k));
  }
}

DenseMatrix FeatureTensor::slice(std::size_t c) const {
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(c * grid * grid);
  return DenseMatrix(grid, grid,
                     std::vector<double>(first, first + static_cast<std::ptrdiff_t>(grid * grid)));
}

std::shared_ptr<const PermutationTable> permutation_table(std::size_t k,
                                                          std::size_t max_brute_k) {
  static std::mutex mu;
  static std::map<std::size_t, std::shared_ptr<const PermutationTable>> tables;

  if (k == 0) fail(ErrorKind::kDomain, "permutation size must be >= 1");
  if (k > max_brute_k) {
    fail(ErrorKind::kCapacity, "k = " + std::to_string(k) + " exceeds max_brute_k = " +
                                   std::to_string(max_brute_k));
  }
  std::lock_guard lock(mu);
  if (auto it = tables.find(k); it != tables.end()) return it->second;

  auto perms = enumerate_permutations(k, max_brute_k);

  auto table = std::make_shared<PermutationTable>();
  table->k = k;
  table->gather.resize(perms.size() * k * k);
  for (std::size_t j = 0; j < perms.size(); ++j) {
    std::uint32_t* g = table->gather.data() + j * k * k;
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        g[a * k + b] = static_cast<std::uint32_t>(perms[j][a] * k + perms[j][b]);
      }
    }
  }
  table->perms = std::move(perms);
  tables.emplace(k, table);
  return table;
}

namespace {

void check_window(const DenseMatrix& kernel, const DenseMatrix& m) {
  if (m.rows() != kernel.rows() || m.cols() != kernel.cols()) {
    fail(ErrorKind::kDimension,
         "window is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
             ", kernel is " + std::to_string(kernel.rows()) + "x" +
             std::to_string(kernel.cols()));
  }
}

inline void load_window(const DenseMatrix& a, std::size_t s, std::size_t t,
                        std::size_t k, double* out) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = a(s + i, t + j);
  }
}

inline void symmetrize_into(const double* x, std::size_t k, double* out) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = 0.5 * (x[i * k + j] + x[j * k + i]);
    }
  }
}

// Returns the min distance and writes its (smallest) permutation index.
inline double brute_window(const double* kernel, const double* window,
                           const PermutationTable& table, std::uint32_t* arg) {
  const std::size_t kk = table.k * table.k;
  const std::size_t count = table.perms.size();
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_j = 0;
  for (std::size_t j = 0; j < count; ++j) {
    const std::uint32_t* g = table.gather.data() + j * kk;
    double d = 0.0;
    for (std::size_t e = 0; e < kk; ++e) {
      const double r = kernel[g[e]] - window[e];
      d += r * r;
    }
    if (d < best) {
      best = d;
      best_j = static_cast<std::uint32_t>(j);
    }
  }
  *arg = best_j;
  return best;
}

double min_gap(const double* lambda, std::size_t k) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + 1 < k; ++j) gap = std::min(gap, lambda[j] - lambda[j + 1]);
  return gap;
}

// Spectral data of a symmetrized kernel, computed once per kernel.
struct KernelSpectrum {
  DenseMatrix sym;
  std::vector<double> abs_u;
  double gap = 0.0;
};

KernelSpectrum kernel_spectrum(const DenseMatrix& kernel) {
  const std::size_t k = kernel.rows();
  KernelSpectrum out;
  out.sym = symmetrize(kernel);
  std::vector<double> work(k * k), lambda(k);
  out.abs_u.resize(k * k);
  detail::eigen_symmetric(out.sym.data(), k, work, out.abs_u, lambda);
  for (double& x : out.abs_u) x = std::abs(x);
  out.gap = min_gap(lambda.data(), k);
  return out;
}

// Scratch for one fast-mode window evaluation.
struct FastScratch {
  explicit FastScratch(std::size_t k)
      : window(k * k), sym(k * k), work(k * k), u(k * k), lambda(k),
        tmp(k * k), conj(k * k) {}
  std::vector<double> window, sym, work, u, lambda, tmp, conj;
};

// Evaluates z for symmetrized window `scratch.sym`, writing p_star.
double fast_window(const KernelSpectrum& ks, std::size_t k, FastScratch& sc,
                   double* p_star, bool* degenerate) {
  detail::eigen_symmetric(sc.sym, k, sc.work, sc.u, sc.lambda);
  for (double& x : sc.u) x = std::abs(x);
  *degenerate = ks.gap < kDegenerateGap || min_gap(sc.lambda.data(), k) < kDegenerateGap;
  detail::matmul_bt(sc.u.data(), ks.abs_u.data(), p_star, k);      // |U_M| |U_K|^T
  detail::matmul(p_star, ks.sym.data().data(), sc.tmp.data(), k);  // P K'
  detail::matmul_bt(sc.tmp.data(), p_star, sc.conj.data(), k);     // P K' P^T
  double z = 0.0;
  for (std::size_t e = 0; e < k * k; ++e) {
    const double r = sc.conj[e] - sc.sym[e];
    z += r * r;
  }
  return z;
}

}  // namespace

DenseMatrix extract_submatrix(const DenseMatrix& a, std::size_t s, std::size_t t,
                              std::size_t k) {
  if (k == 0 || s + k > a.rows() || t + k > a.cols()) {
    fail(ErrorKind::kIndex, "window (" + std::to_string(s) + ", " + std::to_string(t) +
                                ") of size " + std::to_string(k) + " exceeds " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  DenseMatrix out(k, k);
  load_window(a, s, t, k, out.data().data());
  return out;
}

BruteMatch brute_match(const KernelVariable& kernel, const DenseMatrix& m,
                       std::size_t max_brute_k) {
  check_window(kernel.values(), m);
  const auto table = permutation_table(kernel.size_k(), max_brute_k);
  const std::size_t kk = table->k * table->k;
  BruteMatch out;
  out.raw.resize(table->perms.size());
  out.z = std::numeric_limits<double>::infinity();
  const double* kv = kernel.values().data().data();
  const double* mv = m.data().data();
  for (std::size_t j = 0; j < table->perms.size(); ++j) {
    const std::uint32_t* g = table->gather.data() + j * kk;
    double d = 0.0;
    for (std::size_t e = 0; e < kk; ++e) {
      const double r = kv[g[e]] - mv[e];
      d += r * r;
    }
    out.raw[j] = d;
    if (d < out.z) {
      out.z = d;
      out.best_index = j;
    }
  }
  out.best_perm = table->perms[out.best_index];
  return out;
}

FastMatch fast_match(const KernelVariable& kernel, const DenseMatrix& m) {
  check_window(kernel.values(), m);
  const std::size_t k = kernel.size_k();
  const KernelSpectrum ks = kernel_spectrum(kernel.values());
  FastScratch sc(k);
  symmetrize_into(m.data().data(), k, sc.sym.data());
  FastMatch out;
  out.p_star = DenseMatrix(k, k);
  out.z = fast_window(ks, k, sc, out.p_star.data().data(), &out.degenerate_spectrum);
  return out;
}

double eigen_lower_bound(const KernelVariable& kernel, const DenseMatrix& m) {
  check_window(kernel.values(), m);
  const auto ek = symmetric_eigendecomposition(symmetrize(kernel.values()));
  const auto em = symmetric_eigendecomposition(symmetrize(m));
  double sum = 0.0;
  for (std::size_t j = 0; j < ek.lambda.size(); ++j) {
    const double d = ek.lambda[j] - em.lambda[j];
    sum += d * d;
  }
  return sum;
}

RawFeatureTensor compute_raw_features(const DenseMatrix& a,
                                      const KernelVariable& kernel,
                                      std::size_t max_brute_k) {
  const std::size_t k = kernel.size_k();
  if (!a.is_square()) fail(ErrorKind::kDimension, "input matrix must be square");
  if (a.rows() < k) fail(ErrorKind::kDomain, "input smaller than kernel");
  const auto table = permutation_table(k, max_brute_k);
  RawFeatureTensor raw;
  raw.perm_count = table->perms.size();
  raw.grid = a.rows() - k + 1;
  raw.values.resize(raw.perm_count * raw.grid * raw.grid);
  for (std::size_t s = 0; s < raw.grid; ++s) {
    for (std::size_t t = 0; t < raw.grid; ++t) {
      const auto match = brute_match(kernel, extract_submatrix(a, s, t, k), max_brute_k);
      for (std::size_t j = 0; j < raw.perm_count; ++j) raw.at(j, s, t) = match.raw[j];
    }
  }
  return raw;
}

FeatureMap min_pool(const RawFeatureTensor& raw) {
  if (raw.perm_count == 0) fail(ErrorKind::kDimension, "min_pool over an empty axis");
  FeatureMap out;
  out.grid = raw.grid;
  out.values = DenseMatrix(raw.grid, raw.grid);
  out.argmin_index.assign(raw.grid * raw.grid, 0);
  for (std::size_t s = 0; s < raw.grid; ++s) {
    for (std::size_t t = 0; t < raw.grid; ++t) {
      double best = raw.at(0, s, t);
      std::uint32_t arg = 0;
      for (std::size_t j = 1; j < raw.perm_count; ++j) {
        if (raw.at(j, s, t) < best) {
          best = raw.at(j, s, t);
          arg = static_cast<std::uint32_t>(j);
        }
      }
      out.values(s, t) = best;
      out.argmin_index[s * raw.grid + t] = arg;
    }
  }
  return out;
}

FeatureTensor softmax_normalize(std::span<const FeatureMap> maps, SoftmaxAxis axis) {
  if (maps.empty()) fail(ErrorKind::kDimension, "softmax over zero feature maps");
  const std::size_t grid = maps.front().grid;
  for (const auto& m : maps) {
    if (m.grid != grid || m.values.rows() != grid || m.values.cols() != grid) {
      fail(ErrorKind::kDimension, "feature maps disagree on grid size");
    }
  }
  const std::size_t cells = grid * grid;
  FeatureTensor q(maps.size(), grid);
  if (axis == SoftmaxAxis::kPerKernel) {
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const auto z = maps[i].values.data();
      const double zmin = *std::min_element(z.begin(), z.end());
      double* out = q.values.data() + i * cells;
      double sum = 0.0;
      for (std::size_t e = 0; e < cells; ++e) {
        out[e] = std::exp(zmin - z[e]);
        sum += out[e];
      }
      for (std::size_t e = 0; e < cells; ++e) out[e] /= sum;
    }
  } else {
    for (std::size_t e = 0; e < cells; ++e) {
      double zmin = std::numeric_limits<double>::infinity();
      for (const auto& m : maps) zmin = std::min(zmin, m.values.data()[e]);
      double sum = 0.0;
      for (std::size_t i = 0; i < maps.size(); ++i) {
        const double v = std::exp(zmin - maps[i].values.data()[e]);
        q.values[i * cells + e] = v;
        sum += v;
      }
      for (std::size_t i = 0; i < maps.size(); ++i) q.values[i * cells + e] /= sum;
    }
  }
  return q;
}

LayerForward forward_layer(const DenseMatrix& a, std::span<const KernelVariable> kernels,
                           const LayerConfig& config, const ExecOptions& exec) {
  config.validate();
  const std::size_t k = config.size_k;
  if (kernels.size() != config.channels_c) {
    fail(ErrorKind::kDimension, "layer expects " + std::to_string(config.channels_c) +
                                    " kernels, got " + std::to_string(kernels.size()));
  }
  for (const auto& kern : kernels) {
    if (kern.size_k() != k) fail(ErrorKind::kDimension, "kernel size differs from layer k");
  }
  if (!a.is_square()) fail(ErrorKind::kDimension, "layer input must be square");
  if (a.rows() < k) {
    fail(ErrorKind::kDomain, "input has " + std::to_string(a.rows()) +
                                 " nodes, fewer than kernel size " + std::to_string(k));
  }

  const std::size_t c = kernels.size();
  const std::size_t grid = a.rows() - k + 1;
  const std::size_t cells = grid * grid;

  LayerForward out;
  LayerCache& cache = out.cache;
  cache.config = config;
  cache.input = a;
  cache.kernel_count = c;
  cache.grid = grid;
  out.maps.resize(c);
  for (auto& m : out.maps) {
    m.grid = grid;
    m.values = DenseMatrix(grid, grid);
  }

  std::vector<KernelSpectrum> spectra;
  if (config.mode == MatchMode::kBrute) {
    cache.perms = permutation_table(k, config.max_brute_k);
    cache.perm_index.resize(c * cells);
  } else {
    spectra.reserve(c);
    for (const auto& kern : kernels) spectra.push_back(kernel_spectrum(kern.values()));
    cache.p_star.resize(c * cells * k * k);
  }

  // Rows (i, s) are independent; each writes only its own slots.
  const std::size_t rows = c * grid;
  auto run_rows = [&](std::size_t begin, std::size_t end, std::size_t* degenerate) {
    if (config.mode == MatchMode::kBrute) {
      std::vector<double> window(k * k);
      for (std::size_t row = begin; row < end; ++row) {
        const std::size_t i = row / grid, s = row % grid;
        const double* kv = kernels[i].values().data().data();
        for (std::size_t t = 0; t < grid; ++t) {
          load_window(a, s, t, k, window.data());
          const std::size_t cell = s * grid + t;
          out.maps[i].values(s, t) =
              brute_window(kv, window.data(), *cache.perms, &cache.perm_index[i * cells + cell]);
        }
      }
    } else {
      FastScratch sc(k);
      for (std::size_t row = begin; row < end; ++row) {
        const std::size_t i = row / grid, s = row % grid;
        for (std::size_t t = 0; t < grid; ++t) {
          load_window(a, s, t, k, sc.window.data());
          symmetrize_into(sc.window.data(), k, sc.sym.data());
          const std::size_t cell = s * grid + t;
          bool deg = false;
          out.maps[i].values(s, t) =
              fast_window(spectra[i], k, sc, &cache.p_star[(i * cells + cell) * k * k], &deg);
          *degenerate += deg ? 1 : 0;
        }
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(exec.threads, 1, rows);
  if (threads == 1) {
    run_rows(0, rows, &cache.degenerate_windows);
  } else {
    std::vector<std::size_t> degenerate(threads, 0);
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            run_rows(rows * w / threads, rows * (w + 1) / threads, &degenerate[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (std::size_t d : degenerate) cache.degenerate_windows += d;
  }

  if (config.mode == MatchMode::kBrute) {
    for (std::size_t i = 0; i < c; ++i) {
      out.maps[i].argmin_index.assign(cache.perm_index.begin() + static_cast<std::ptrdiff_t>(i * cells),
                                      cache.perm_index.begin() + static_cast<std::ptrdiff_t>((i + 1) * cells));
    }
  } else {
    for (auto& s : spectra) cache.sym_kernels.push_back(std::move(s.sym));
  }

  out.q = softmax_normalize(out.maps, config.softmax_axis);
  cache.q = out.q;
  return out;
}

namespace {

// dL/dZ from dL/dQ, with Q = softmax(-Z) per normalization group.
std::vector<double> softmax_backward(const FeatureTensor& q, const FeatureTensor& grad_q,
                                     SoftmaxAxis axis) {
  const std::size_t cells = q.grid * q.grid;
  std::vector<double> gz(q.values.size());
  if (axis == SoftmaxAxis::kPerKernel) {
    for (std::size_t i = 0; i < q.channels; ++i) {
      const double* qi = q.values.data() + i * cells;
      const double* gi = grad_q.values.data() + i * cells;
      double dot = 0.0;
      for (std::size_t e = 0; e < cells; ++e) dot += qi[e] * gi[e];
      for (std::size_t e = 0; e < cells; ++e) gz[i * cells + e] = -qi[e] * (gi[e] - dot);
    }
  } else {
    for (std::size_t e = 0; e < cells; ++e) {
      double dot = 0.0;
      for (std::size_t i = 0; i < q.channels; ++i) {
        dot += q.values[i * cells + e] * grad_q.values[i * cells + e];
      }
      for (std::size_t i = 0; i < q.channels; ++i) {
        const std::size_t idx = i * cells + e;
        gz[idx] = -q.values[idx] * (grad_q.values[idx] - dot);
      }
    }
  }
  return gz;
}

}  // namespace

LayerGradients backward_layer(const FeatureTensor& grad_q, const LayerCache& cache,
                              std::span<const KernelVariable> kernels,
                              const LayerConfig& config, bool need_input_grad) {
  if (!(cache.config == config) || cache.kernel_count != kernels.size() ||
      grad_q.channels != cache.q.channels || grad_q.grid != cache.q.grid) {
    fail(ErrorKind::kState, "backward_layer cache does not match this layer");
  }
  const bool brute = config.mode == MatchMode::kBrute;
  if ((brute && !cache.perms) || (!brute && cache.sym_kernels.size() != kernels.size())) {
    fail(ErrorKind::kState, "backward_layer cache was not populated for this mode");
  }
  const std::size_t k = config.size_k;
  const std::size_t grid = cache.grid;
  const std::size_t cells = grid * grid;
  const DenseMatrix& a = cache.input;

  const std::vector<double> gz = softmax_backward(cache.q, grad_q, config.softmax_axis);

  LayerGradients out;
  out.kernels.assign(kernels.size(), DenseMatrix(k, k));
  if (need_input_grad) out.input = DenseMatrix(a.rows(), a.cols());

  std::vector<double> window(k * k), sym(k * k), tmp(k * k), resid(k * k), grad(k * k);
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    double* gk = out.kernels[i].data().data();
    const double* kv = kernels[i].values().data().data();
    for (std::size_t s = 0; s < grid; ++s) {
      for (std::size_t t = 0; t < grid; ++t) {
        const std::size_t cell = s * grid + t;
        const double g = gz[i * cells + cell];
        if (g == 0.0) continue;
        load_window(a, s, t, k, window.data());
        if (brute) {
          const std::uint32_t j = cache.perm_index[i * cells + cell];
          const std::uint32_t* gather = cache.perms->gather.data() + j * k * k;
          // z = sum_e (K[gather[e]] - M[e])^2
          for (std::size_t e = 0; e < k * k; ++e) {
            const double r = kv[gather[e]] - window[e];
            gk[gather[e]] += 2.0 * g * r;
            resid[e] = r;
          }
        } else {
          const double* p = &cache.p_star[(i * cells + cell) * k * k];
          const double* ks = cache.sym_kernels[i].data().data();
          symmetrize_into(window.data(), k, sym.data());
          detail::matmul(p, ks, tmp.data(), k);
          detail::matmul_bt(tmp.data(), p, grad.data(), k);
          for (std::size_t e = 0; e < k * k; ++e) resid[e] = grad[e] - sym[e];
          // dz/dK = 2 P^T R P (symmetric, so it equals its own symmetrization)
          for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t col = 0; col < k; ++col) {
              double acc = 0.0;
              for (std::size_t l = 0; l < k; ++l) acc += resid[r * k + l] * p[l * k + col];
              tmp[r * k + col] = acc;  // R P
            }
          }
          for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t col = 0; col < k; ++col) {
              double acc = 0.0;
              for (std::size_t l = 0; l < k; ++l) acc += p[l * k + r] * tmp[l * k + col];
              gk[r * k + col] += 2.0 * g * acc;
            }
          }
        }
        if (need_input_grad) {
          for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t col = 0; col < k; ++col) {
              out.input(s + r, t + col) -= 2.0 * g * resid[r * k + col];
            }
          }
        }
      }
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> stack_output_shape(std::size_t n,
                                                       std::span<const IsoLayer> layers) {
  if (layers.empty()) fail(ErrorKind::kConfig, "layer stack is empty");
  std::size_t channels = 1, grid = n;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t k = layers[l].config.size_k;
    if (k == 0 || k > grid) {
      fail(ErrorKind::kDomain, "layer " + std::to_string(l) + " has kernel size " +
                                   std::to_string(k) + " but its input grid is " +
                                   std::to_string(grid));
    }
    grid = grid - k + 1;
    channels *= layers[l].config.channels_c;
  }
  return {channels, grid};
}

StackForward forward_stack(const DenseMatrix& a, std::span<const IsoLayer> layers,
                           const ExecOptions& exec) {
  stack_output_shape(a.rows(), layers);
  StackForward out;
  std::vector<DenseMatrix> inputs{a};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const IsoLayer& layer = layers[l];
    const std::size_t c = layer.config.channels_c;
    auto& caches = out.cache.layers.emplace_back();
    FeatureTensor q;
    for (std::size_t u = 0; u < inputs.size(); ++u) {
      LayerForward f = forward_layer(inputs[u], layer.kernels, layer.config, exec);
      if (u == 0) q = FeatureTensor(inputs.size() * c, f.q.grid);
      std::copy(f.q.values.begin(), f.q.values.end(),
                q.values.begin() + static_cast<std::ptrdiff_t>(u * f.q.values.size()));
      caches.push_back(std::move(f.cache));
    }
    if (l + 1 < layers.size()) {
      inputs.clear();
      for (std::size_t ch = 0; ch < q.channels; ++ch) inputs.push_back(q.slice(ch));
    }
    out.q = std::move(q);
  }
  return out;
}

std::vector<std::vector<DenseMatrix>> backward_stack(const FeatureTensor& grad_q,
                                                     const StackCache& cache,
                                                     std::span<const IsoLayer> layers) {
  if (cache.layers.size() != layers.size()) {
    fail(ErrorKind::kState, "stack cache depth does not match the layer stack");
  }
  std::vector<std::vector<DenseMatrix>> grads(layers.size());
  FeatureTensor upstream = grad_q;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const IsoLayer& layer = layers[l];
    const auto& caches = cache.layers[l];
    const std::size_t c = layer.config.channels_c;
    if (upstream.channels != caches.size() * c) {
      fail(ErrorKind::kState, "gradient channel count does not match layer " + std::to_string(l));
    }
    const std::size_t k = layer.config.size_k;
    grads[l].assign(c, DenseMatrix(k, k));
    FeatureTensor next;
    const std::size_t slice_len = c * upstream.grid * upstream.grid;
    for (std::size_t u = 0; u < caches.size(); ++u) {
      FeatureTensor part(c, upstream.grid);
      std::copy(upstream.values.begin() + static_cast<std::ptrdiff_t>(u * slice_len),
                upstream.values.begin() + static_cast<std::ptrdiff_t>((u + 1) * slice_len),
                part.values.begin());
      LayerGradients g = backward_layer(part, caches[u], layer.kernels, layer.config, l > 0);
      for (std::size_t i = 0; i < c; ++i) {
        auto dst = grads[l][i].data();
        auto src = g.kernels[i].data();
        for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
      }
      if (l > 0) {
        if (u == 0) next = FeatureTensor(caches.size(), g.input.rows());
        std::copy(g.input.data().begin(), g.input.data().end(),
                  next.values.begin() + static_cast<std::ptrdiff_t>(u * g.input.size()));
      }
    }
    upstream = std::move(next);
  }
  return grads;
}

}  // namespace isonn
