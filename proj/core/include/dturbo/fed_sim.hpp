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
// Federated round loop over simulated clients. Each round: broadcast, local
// training on every client in parallel, upload, then the sequential server
// phase. All communication goes through the codec so the ledger counts the
// bits that were actually produced.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dturbo/bayes_nn.hpp"
#include "dturbo/codec.hpp"
#include "dturbo/grid_mrf.hpp"
#include "dturbo/prior.hpp"
#include "dturbo/vbi_server.hpp"

namespace dturbo {

enum class Method { kTurboVbi, kTopk, kQuant, kFedAvg };

/// "turbo_vbi", "topk_baseline", "quant_baseline", "fedavg".
std::string method_name(Method m);
/// Throws ConfigError on an unknown name.
Method parse_method(const std::string& name);

struct FedConfig {
  std::size_t clients = 10;
  int rounds = 20;
  int local_steps = 10;
  double dirichlet_alpha = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  unsigned bits_per_value = 16;
  std::size_t min_cluster = 3;  // clusters need both sides > this
  /// Compressed transport starts once the support mask keeps some entries,
  /// prunes others, and has flipped at most mask_stable_tol of its entries per
  /// round for mask_stable_rounds consecutive rounds. It never switches back.
  double mask_stable_tol = 0.01;
  int mask_stable_rounds = 6;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

struct BaselineConfig {
  double topk_fraction = 0.1;
  unsigned quant_bits = 8;
};

struct ExperimentConfig {
  Method method = Method::kTurboVbi;
  NetArch arch;
  FedConfig fed;
  StepSchedule schedule;
  ServerInit init;  // seed is overwritten from fed.seed
  HierPrior prior;
  SpmpOptions spmp;
  BaselineConfig baselines;
  std::size_t nelb_sample = 1000;
  std::size_t threads = 0;  // 0: hardware concurrency
  bool timing = false;      // fill the per-round seconds column

  void validate() const;
};

struct ClientDataset {
  Dataset data;
  std::vector<std::size_t> indices;  // rows of the global dataset, ascending
  double weight = 0.0;               // |D_t| / |D|
};

/// Non-iid split: for every class, client shares are drawn from
/// Dirichlet(alpha, ..., alpha) and the class's shuffled records are cut at the
/// cumulative shares. If any client ends up empty the whole draw is repeated,
/// up to 100 times; then std::runtime_error.
std::vector<ClientDataset> dirichlet_partition(const Dataset& data, std::size_t clients,
                                               double alpha, std::uint64_t seed);

/// Bits on the wire in one round.
struct RoundComm {
  std::vector<std::uint64_t> up;  // per client
  std::uint64_t down_each = 0;    // broadcast size received by every client
  std::uint64_t up_total() const;
  std::uint64_t down_total() const { return down_each * up.size(); }
};

class CommLedger {
 public:
  explicit CommLedger(std::string scheme = {}) : scheme_(std::move(scheme)) {}
  void record(RoundComm round);
  const std::string& scheme() const { return scheme_; }
  const std::vector<RoundComm>& rounds() const { return rounds_; }
  std::uint64_t cumulative_up(std::size_t through_round) const;
  std::uint64_t cumulative_down(std::size_t through_round) const;

 private:
  std::string scheme_;
  std::vector<RoundComm> rounds_;
};

struct RoundMetrics {
  int round = 0;
  double accuracy = 0.0;
  std::uint64_t bits_up = 0;    // cumulative
  std::uint64_t bits_down = 0;  // cumulative
  double sparsity = 1.0;        // fraction of nonzero weights
  std::optional<double> nelb;   // turbo only
  double seconds = 0.0;         // cumulative wall clock, 0 unless timing is on

  // Diagnostics, not part of the results CSV.
  double turbo_consistency = 0.0;  // max |normalize(v_down * v_up) - q(s)|
  int spmp_iters = 0;
  bool spmp_converged = true;
  bool compressed = false;  // compressed transport was used this round
  double mask_flip_fraction = 0.0;
  double max_pi_change = 0.0;
  double mu_norm_sq = 0.0;
  double client_sigma = 0.0;
  double eta_sum = 0.0;     // cumulative sum of step sizes
  double eta_sq_sum = 0.0;  // cumulative sum of squared step sizes
};

/// Tracks the empirical convergence indicators round by round.
class ConvergenceMonitor {
 public:
  struct Violation {
    std::size_t index = 0;  // position in the averaged series
    double relative_increase = 0.0;
  };

  void push(double nelb) { nelb_.push_back(nelb); }
  const std::vector<double>& nelb() const { return nelb_; }

  /// Trailing means over `window` entries, starting at the first full window.
  static std::vector<double> trailing_average(const std::vector<double>& xs, std::size_t window);
  /// Places where the trailing mean goes up, with the increase relative to |previous mean|.
  static std::vector<Violation> increases(const std::vector<double>& xs, std::size_t window);

 private:
  std::vector<double> nelb_;
};

struct ResultsBundle {
  Method method = Method::kTurboVbi;
  RoundMetrics initial;  // evaluation before any training
  std::vector<RoundMetrics> rounds;
  CommLedger ledger;
  std::vector<std::size_t> client_sizes;
  std::optional<ServerState> final_server;  // turbo only
  std::vector<double> final_weights;        // evaluated weights (masked for turbo)
  std::vector<double> final_bias;
  double wall_seconds = 0.0;
};

/// Called after every round; handy for progress output.
using RoundCallback = std::function<void(const RoundMetrics&)>;

/// What the server broadcasts at the start of a round, as the clients decode it.
struct Broadcast {
  std::vector<double> mu;
  std::vector<double> bias;
  double sigma = 0.0;
  std::vector<double> prior_std;      // turbo only
  bool compressed = false;            // mu sent cluster-coded on the mask
  std::vector<ClusterMask> clusters;  // per layer, when compressed
  std::uint64_t bits = 0;
};

/// One experiment, advanced a round at a time.
class FedSimulation {
 public:
  /// Validates the config, partitions `train`, initializes the server and the
  /// first broadcast. `train` and `test` must outlive the simulation.
  FedSimulation(const ExperimentConfig& config, const Dataset& train, const Dataset& test);

  /// Broadcast, parallel local training, upload, server update, evaluation.
  RoundMetrics run_round();
  /// Metrics of the current global model without training.
  RoundMetrics evaluate() const;

  int rounds_done() const { return round_; }
  const ServerState& server() const { return server_; }
  const Broadcast& broadcast() const { return broadcast_; }
  const CommLedger& ledger() const { return ledger_; }
  const std::vector<ClientDataset>& clients() const { return clients_; }
  const ExperimentConfig& config() const { return config_; }
  /// Weights used for evaluation (turbo: masked by the support decision).
  std::vector<double> evaluation_weights() const;

 private:
  struct Upload {
    std::vector<double> mu;
    std::vector<double> bias;
    double sigma = 0.0;
    std::uint64_t bits = 0;
  };

  Upload train_client(std::size_t t) const;
  void server_phase_turbo(const Aggregate& agg, RoundMetrics* m);
  void server_phase_baseline(const Aggregate& agg);
  void build_turbo_broadcast(const std::vector<std::vector<std::uint8_t>>& masks);

  ExperimentConfig config_;
  const Dataset& train_;
  const Dataset& test_;
  std::vector<ClientDataset> clients_;
  Dataset nelb_sample_;
  ServerState server_;
  Broadcast broadcast_;
  CommLedger ledger_;
  std::vector<std::uint8_t> prev_mask_;
  bool latched_ = false;
  int stable_rounds_ = 0;
  int round_ = 0;
  double eta_sum_ = 0.0;
  double eta_sq_sum_ = 0.0;
  std::uint64_t nelb_seed_ = 0;
};

ResultsBundle run_experiment(const ExperimentConfig& config, const Dataset& train,
                             const Dataset& test, const RoundCallback& on_round = {});

/// Runs fn(i) for i in [0, n) on up to `threads` workers and joins.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

/// Mask for evaluation and encoding: weight kept iff q(s = 1) >= 0.5, per layer.
std::vector<std::vector<std::uint8_t>> layer_masks(const NetArch& arch,
                                                   std::span<const double> pi_tilde);

}  // namespace dturbo
