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
// Server half of the variational scheme: closed-form support and precision
// posteriors, weighted aggregation of client uploads, and the message exchange
// with the grid support prior.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dturbo/bayes_nn.hpp"
#include "dturbo/grid_mrf.hpp"
#include "dturbo/prior.hpp"
#include "dturbo/special_math.hpp"

namespace dturbo {

struct ServerState {
  NetArch arch;
  std::vector<HierPrior> priors;          // one per layer
  std::vector<double> pi_tilde;           // q(s = 1) per weight
  std::vector<GammaParams> gamma_post;    // q(rho) per weight
  std::vector<double> pi_prior;           // support prior from the grid module
  std::vector<BernoulliMessage> downward; // last extrinsic message from the grid module
  std::vector<double> mu_global;
  std::vector<double> bias_global;
  double sigma_global = 0.05;

  const HierPrior& prior_of_layer(std::size_t l) const { return priors[l]; }
  /// Throws std::invalid_argument if any array is misaligned with the architecture.
  void validate() const;
};

struct ServerInit {
  double init_sigma = 0.05;
  double init_scale = 0.3;  // multiplies the He-normal draw of the initial means
  double init_support = 0.5;  // starting q(s = 1) for every weight
  std::uint64_t seed = 0;
};

/// q(s = 1) starts at init_support, q(rho) at one precision update from
/// there, the support prior at 0.5 with uniform grid messages.
ServerState init_server(const NetArch& arch, const HierPrior& prior, const ServerInit& init);

/// q(s = 1) for one weight given its current q(rho) and support prior.
double support_posterior(double pi_prior, const GammaParams& q_rho, const HierPrior& p);

/// q(rho) for one weight given q(s = 1), mean and std.
GammaParams precision_posterior(double pi_tilde, double mu, double sigma, const HierPrior& p);

std::vector<double> update_support_posterior(const ServerState& state);
std::vector<GammaParams> update_precision_posterior(const ServerState& state);

/// Per-weight prior std handed to clients: sqrt(b~ / a~).
std::vector<double> prior_std(const ServerState& state);

struct ClientUpload {
  std::span<const double> mu;
  std::span<const double> bias;
  double sigma = 0.0;
  double weight = 0.0;
};

struct Aggregate {
  std::vector<double> mu;
  std::vector<double> bias;
  double sigma = 0.0;
};

inline constexpr double kWeightSumTol = 1e-9;

/// Weighted means of the uploads. Throws std::invalid_argument when the
/// weights do not sum to one or the arrays differ in length.
Aggregate aggregate(std::span<const ClientUpload> uploads);

/// q(s) / v_down per support value, floored at kMessageFloor, normalized.
std::vector<BernoulliMessage> compute_upward_messages(std::span<const double> pi_tilde,
                                                      std::span<const BernoulliMessage> downward);

/// pi = v(1) / (v(0) + v(1)).
std::vector<double> refresh_support_prior(std::span<const BernoulliMessage> extrinsic);

struct GridPassStats {
  int max_iters_used = 0;
  bool all_converged = true;
};

/// Runs the grid module layer by layer on the upward messages and returns the
/// extrinsic downward messages in weight order.
std::vector<BernoulliMessage> run_support_prior(const ServerState& state,
                                                std::span<const BernoulliMessage> upward,
                                                const SpmpOptions& options,
                                                GridPassStats* stats = nullptr);

struct NelbParts {
  double gaussian = 0.0;   // E[ln q(w) - ln p(w | rho)]
  double gamma = 0.0;      // E[ln q(rho) - ln p(rho | s)]
  double bernoulli = 0.0;  // KL(q(s) || support prior)
  double data = 0.0;       // -E ln p(D | w), one weight sample

  double kl() const { return gaussian + gamma + bernoulli; }
  double total() const { return kl() + data; }
};

/// KL(q(s) || Bernoulli(pi)) with the 0 ln 0 = 0 convention.
double bernoulli_kl(double q, double pi);

/// Negative evidence lower bound. The data term is scaled from `sample` up to
/// `total_records` and uses one draw of w = mu_global + sigma_global * eps.
NelbParts nelb(const ServerState& state, const Dataset& sample, double total_records,
               std::uint64_t seed);

/// Binary mask of weights kept by the Bayes decision q(s = 1) >= 0.5.
std::vector<std::uint8_t> active_mask(std::span<const double> pi_tilde);

}  // namespace dturbo
