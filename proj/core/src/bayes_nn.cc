// Copyright 2026 The dturbo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "dturbo/bayes_nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "dturbo/special_math.hpp"

namespace dturbo {

NetArch::NetArch(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("model.layers: need at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].rows == 0 || layers_[l].cols == 0) {
      throw ConfigError("model.layers: layer " + std::to_string(l) + " has a zero dimension");
    }
    if (l > 0 && layers_[l].rows != layers_[l - 1].cols) {
      throw ConfigError("model.layers: layer " + std::to_string(l) + " expects " +
                        std::to_string(layers_[l].rows) + " inputs but layer " +
                        std::to_string(l - 1) + " produces " + std::to_string(layers_[l - 1].cols));
    }
    weight_offsets_.push_back(weight_offsets_.back() + layers_[l].size());
    bias_offsets_.push_back(bias_offsets_.back() + layers_[l].cols);
  }
}

NetArch NetArch::mlp(std::span<const std::size_t> widths) {
  if (widths.size() < 2) throw ConfigError("model.layers: need at least input and output widths");
  std::vector<LayerShape> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) layers.push_back({widths[i], widths[i + 1]});
  return NetArch(std::move(layers));
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("Dataset: feature rows and label count differ");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("Dataset: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
  }
}

VariationalNetState VariationalNetState::zeros(const NetArch& arch, double sigma, double prior_std) {
  VariationalNetState s;
  s.arch = arch;
  s.mu.assign(arch.weight_count(), 0.0);
  s.bias.assign(arch.bias_count(), 0.0);
  s.prior_std.assign(arch.weight_count(), prior_std);
  s.sigma = sigma;
  return s;
}

void VariationalNetState::validate() const {
  if (mu.size() != arch.weight_count() || prior_std.size() != arch.weight_count()) {
    throw std::invalid_argument("VariationalNetState: weight arrays do not match the architecture");
  }
  if (bias.size() != arch.bias_count()) {
    throw std::invalid_argument("VariationalNetState: bias array does not match the architecture");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("VariationalNetState: sigma must be positive");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffU); };
  const auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

WeightNoise draw_noise(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  WeightNoise noise;
  noise.eps.resize(count);
  for (auto& e : noise.eps) e = normal(rng);
  return noise;
}

std::vector<double> sample_weights(const VariationalNetState& state, const WeightNoise& noise) {
  if (noise.eps.size() != state.mu.size()) {
    throw std::invalid_argument("sample_weights: noise length does not match weight count");
  }
  std::vector<double> w(state.mu.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = state.mu[i] + state.sigma * noise.eps[i];
  return w;
}

std::vector<double> sample_weights(const VariationalNetState& state, std::uint64_t seed) {
  return sample_weights(state, draw_noise(state.mu.size(), seed));
}

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap layer_weights(const NetArch& arch, std::span<const double> w, std::size_t l) {
  const auto& s = arch.layers()[l];
  return ConstMap(w.data() + arch.weight_offset(l), static_cast<Eigen::Index>(s.rows),
                  static_cast<Eigen::Index>(s.cols));
}

Eigen::Map<const Eigen::RowVectorXd> layer_bias(const NetArch& arch, std::span<const double> b,
                                                std::size_t l) {
  return Eigen::Map<const Eigen::RowVectorXd>(b.data() + arch.bias_offset(l),
                                              static_cast<Eigen::Index>(arch.layers()[l].cols));
}

// Activations entering each layer; the last entry holds the logits.
std::vector<RowMatrix> forward_all(const NetArch& arch, std::span<const double> w,
                                   std::span<const double> b, const RowMatrix& x) {
  std::vector<RowMatrix> acts;
  acts.reserve(arch.num_layers() + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    RowMatrix z = acts.back() * layer_weights(arch, w, l);
    z.rowwise() += layer_bias(arch, b, l);
    if (l + 1 < arch.num_layers()) z = z.cwiseMax(0.0);
    acts.push_back(std::move(z));
  }
  return acts;
}

void check_batch(const VariationalNetState& state, const Minibatch& batch) {
  if (!batch.empty() && batch.dim() != state.arch.input_dim()) {
    throw std::invalid_argument("minibatch feature width " + std::to_string(batch.dim()) +
                                " does not match network input " +
                                std::to_string(state.arch.input_dim()));
  }
}

double data_factor(const DataScale& scale, std::size_t batch_size) {
  if (batch_size == 0) return 0.0;
  return scale.local_records / (scale.client_weight * static_cast<double>(batch_size));
}

}  // namespace

double cross_entropy_sum(const RowMatrix& logits, std::span<const int> labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    total += lse - row(labels[static_cast<std::size_t>(i)]);
  }
  return total;
}

RowMatrix forward_logits(const NetArch& arch, std::span<const double> weights,
                         std::span<const double> bias, const RowMatrix& features) {
  return std::move(forward_all(arch, weights, bias, features).back());
}

double accuracy(const NetArch& arch, std::span<const double> weights, std::span<const double> bias,
                const Dataset& data) {
  if (data.empty()) return 0.0;
  const RowMatrix logits = forward_logits(arch, weights, bias, data.features);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == data.labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

LossParts local_loss_parts(const VariationalNetState& state, const Minibatch& batch,
                           const DataScale& scale, const WeightNoise& noise) {
  check_batch(state, batch);
  LossParts parts;
  for (std::size_t n = 0; n < state.mu.size(); ++n) {
    parts.kl += kl_gauss_to_centered({state.mu[n], state.sigma}, state.prior_std[n]);
  }
  for (double b : state.bias) parts.bias_prior += 0.5 * b * b;
  if (!batch.empty()) {
    const auto w = sample_weights(state, noise);
    const RowMatrix logits = forward_logits(state.arch, w, state.bias, batch.features);
    parts.data = data_factor(scale, batch.size()) * cross_entropy_sum(logits, batch.labels);
  }
  return parts;
}

double local_loss(const VariationalNetState& state, const Minibatch& batch, const DataScale& scale,
                  const WeightNoise& noise) {
  return local_loss_parts(state, batch, scale, noise).total();
}

double local_loss(const VariationalNetState& state, const Minibatch& batch, const DataScale& scale,
                  std::uint64_t seed) {
  return local_loss(state, batch, scale, draw_noise(state.mu.size(), seed));
}

Gradients local_gradients(const VariationalNetState& state, const Minibatch& batch,
                          const DataScale& scale, const WeightNoise& noise) {
  check_batch(state, batch);
  const std::size_t nw = state.mu.size();
  Gradients g;
  g.mu.assign(nw, 0.0);
  g.bias = state.bias;  // d/db of 0.5 b^2

  // KL part: d/dmu = mu / s^2, d/dsigma = sigma / s^2 - 1 / sigma.
  const double sig = state.sigma;
  for (std::size_t n = 0; n < nw; ++n) {
    const double inv_var = 1.0 / (state.prior_std[n] * state.prior_std[n]);
    g.mu[n] = state.mu[n] * inv_var;
    g.sigma += sig * inv_var - 1.0 / sig;
  }
  if (batch.empty()) return g;

  const auto w = sample_weights(state, noise);
  const NetArch& arch = state.arch;
  auto acts = forward_all(arch, w, state.bias, batch.features);

  // Softmax minus one-hot, times the data scale.
  RowMatrix delta = std::move(acts.back());
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    auto row = delta.row(i);
    const double m = row.maxCoeff();
    row = (row.array() - m).exp();
    row /= row.sum();
    row(batch.labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  delta *= data_factor(scale, batch.size());

  std::vector<double> grad_w(nw, 0.0);
  for (std::size_t l = arch.num_layers(); l-- > 0;) {
    const auto& s = arch.layers()[l];
    MutMap gw(grad_w.data() + arch.weight_offset(l), static_cast<Eigen::Index>(s.rows),
              static_cast<Eigen::Index>(s.cols));
    gw.noalias() = acts[l].transpose() * delta;
    const Eigen::RowVectorXd gb = delta.colwise().sum();
    for (std::size_t j = 0; j < s.cols; ++j) {
      g.bias[arch.bias_offset(l) + j] += gb(static_cast<Eigen::Index>(j));
    }
    if (l > 0) {
      RowMatrix upstream = delta * layer_weights(arch, w, l).transpose();
      delta = (acts[l].array() > 0.0).select(upstream, 0.0);
    }
  }
  for (std::size_t n = 0; n < nw; ++n) {
    g.mu[n] += grad_w[n];
    g.sigma += grad_w[n] * noise.eps[n];
  }
  return g;
}

Gradients local_gradients(const VariationalNetState& state, const Minibatch& batch,
                          const DataScale& scale, std::uint64_t seed) {
  return local_gradients(state, batch, scale, draw_noise(state.mu.size(), seed));
}

VariationalNetState local_sgd(VariationalNetState state, const Dataset& data,
                              const DataScale& scale, const StepSchedule& schedule,
                              const LocalSgdOptions& options) {
  if (data.empty()) throw std::invalid_argument("local_sgd: empty dataset");
  if (options.batch_size == 0) throw std::invalid_argument("local_sgd: batch_size must be positive");
  state.validate();
  const bool plain = !options.variational;
  std::vector<double> saved_prior_std;
  if (plain) saved_prior_std = state.prior_std;
  if (plain) state.prior_std.assign(state.mu.size(), std::numeric_limits<double>::infinity());

  const std::size_t n = data.size();
  const std::size_t b = std::min(options.batch_size, n);
  const double records = scale.global_records();
  const double inv_nw = state.mu.empty() ? 0.0 : 1.0 / static_cast<double>(state.mu.size());
  std::vector<std::size_t> order(n);

  for (int step = 0; step < options.steps; ++step) {
    const double eta = schedule(options.step_offset + step);
    if (eta == 0.0) continue;

    std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(step), 0));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < b && b < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    const Minibatch batch = data.subset(std::span<const std::size_t>(order.data(), b));
    const WeightNoise noise =
        plain ? WeightNoise{std::vector<double>(state.mu.size(), 0.0)}
              : draw_noise(state.mu.size(), derive_seed(options.seed, static_cast<std::uint64_t>(step), 1));
    const Gradients g = local_gradients(state, batch, scale, noise);

    const double lr = eta / records;
    for (std::size_t i = 0; i < state.mu.size(); ++i) {
      const double var = state.prior_std[i] * state.prior_std[i];
      state.mu[i] -= std::min(lr, var) * g.mu[i];
    }
    for (std::size_t i = 0; i < state.bias.size(); ++i) state.bias[i] -= lr * g.bias[i];
    if (plain) continue;

    const double dlog = std::clamp(-eta * state.sigma * g.sigma * inv_nw,
                                   -options.max_log_sigma_step, options.max_log_sigma_step);
    state.sigma = std::max(options.min_sigma, state.sigma * std::exp(dlog));
  }
  if (plain) state.prior_std = std::move(saved_prior_std);
  return state;
}

}  // namespace dturbo
