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
//
// Variational ReLU MLP with a mean-field Gaussian over the weights. Every
// weight shares one client-level std `sigma`; biases are point estimates under
// a fixed N(0, 1) prior and never pruned.

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dturbo/prior.hpp"

namespace dturbo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fully connected ReLU network ending in softmax cross-entropy. Layer l maps
/// layers[l].rows inputs to layers[l].cols outputs.
class NetArch {
 public:
  NetArch() = default;
  /// Throws ConfigError if consecutive layers do not compose.
  explicit NetArch(std::vector<LayerShape> layers);
  /// {784, 128, 64, 10} -> three layers.
  static NetArch mlp(std::span<const std::size_t> widths);

  std::span<const LayerShape> layers() const { return layers_; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().rows; }
  std::size_t num_classes() const { return layers_.empty() ? 0 : layers_.back().cols; }
  std::size_t weight_count() const { return weight_offsets_.back(); }
  std::size_t bias_count() const { return bias_offsets_.back(); }
  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return bias_offsets_[layer]; }

  bool operator==(const NetArch& o) const { return layers_ == o.layers_; }

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> weight_offsets_{0};
  std::vector<std::size_t> bias_offsets_{0};
};

/// Labeled feature matrix. Also used for minibatches.
struct Dataset {
  RowMatrix features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool empty() const { return labels.empty(); }
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Throws std::invalid_argument on a row-count mismatch or an out-of-range label.
  void validate() const;
};
using Minibatch = Dataset;

struct VariationalNetState {
  NetArch arch;
  std::vector<double> mu;         // weight means, layer blocks in row-major order
  std::vector<double> bias;       // bias values
  std::vector<double> prior_std;  // per-weight prior std received from the server
  double sigma = 1.0;             // client-level posterior std shared by all weights

  /// All-zero means and biases with a uniform prior std.
  static VariationalNetState zeros(const NetArch& arch, double sigma, double prior_std);
  /// Throws std::invalid_argument if array sizes or sigma are invalid.
  void validate() const;
};

/// Standard normal draws, one per weight.
struct WeightNoise {
  std::vector<double> eps;
};

WeightNoise draw_noise(std::size_t count, std::uint64_t seed);

/// w = mu + sigma * eps with eps drawn from `seed`.
std::vector<double> sample_weights(const VariationalNetState& state, std::uint64_t seed);
std::vector<double> sample_weights(const VariationalNetState& state, const WeightNoise& noise);

/// Scaling of the data term. The per-batch cross-entropy sum is multiplied by
/// local_records / (client_weight * batch_size), which equals |D| / batch_size.
struct DataScale {
  double client_weight = 1.0;  // |D_t| / |D|
  double local_records = 1.0;  // |D_t|

  double global_records() const { return local_records / client_weight; }
};

struct LossParts {
  double kl = 0.0;          // sum over weights of KL(N(mu, sigma^2) || N(0, prior_std^2))
  double bias_prior = 0.0;  // 0.5 * sum of squared biases
  double data = 0.0;        // scaled cross-entropy under one weight sample

  double total() const { return kl + bias_prior + data; }
};

struct Gradients {
  std::vector<double> mu;
  std::vector<double> bias;
  double sigma = 0.0;
};

LossParts local_loss_parts(const VariationalNetState& state, const Minibatch& batch,
                           const DataScale& scale, const WeightNoise& noise);
double local_loss(const VariationalNetState& state, const Minibatch& batch, const DataScale& scale,
                  std::uint64_t seed);
double local_loss(const VariationalNetState& state, const Minibatch& batch, const DataScale& scale,
                  const WeightNoise& noise);

/// Pathwise gradient of local_loss at the same noise draw.
Gradients local_gradients(const VariationalNetState& state, const Minibatch& batch,
                          const DataScale& scale, const WeightNoise& noise);
Gradients local_gradients(const VariationalNetState& state, const Minibatch& batch,
                          const DataScale& scale, std::uint64_t seed);

/// eta(l) = eta0 / (1 + l / tau). Satisfies sum eta = inf, sum eta^2 < inf.
struct StepSchedule {
  double eta0 = 2.0;
  double tau = 100.0;

  double operator()(long step) const { return eta0 / (1.0 + static_cast<double>(step) / tau); }
};

struct LocalSgdOptions {
  int steps = 10;
  std::size_t batch_size = 32;
  long step_offset = 0;  // global index of the first step, for the schedule
  std::uint64_t seed = 0;
  double min_sigma = 1e-4;
  double max_log_sigma_step = 0.5;
  /// false: point-estimate SGD on the data term only (no weight noise, no KL
  /// pull, sigma left untouched). Used by the non-Bayesian comparators.
  bool variational = true;
};

/// Minibatch SGD on (mu, bias, sigma).
///
/// The mean step is preconditioned per weight: mu -= min(eta / |D|, prior_std^2) * dL/dmu.
/// Dividing by |D| turns the |D|-scaled loss into a per-record objective, and the
/// prior_std^2 cap keeps the KL pull from overshooting zero on tightly pruned
/// weights. sigma moves in log space by -eta * sigma * dL/dsigma / n_weights,
/// clipped, then clamped to >= min_sigma. Throws std::invalid_argument on an
/// empty dataset.
VariationalNetState local_sgd(VariationalNetState state, const Dataset& data,
                              const DataScale& scale, const StepSchedule& schedule,
                              const LocalSgdOptions& options);

/// Deterministic logits for fixed weights.
RowMatrix forward_logits(const NetArch& arch, std::span<const double> weights,
                         std::span<const double> bias, const RowMatrix& features);

/// Fraction of rows whose argmax logit equals the label. 0 on an empty set.
double accuracy(const NetArch& arch, std::span<const double> weights, std::span<const double> bias,
                const Dataset& data);

/// Sum over rows of -ln softmax(logits)[label].
double cross_entropy_sum(const RowMatrix& logits, std::span<const int> labels);

/// Seed for one (run seed, round, client, step) cell, mixed through seed_seq.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace dturbo
