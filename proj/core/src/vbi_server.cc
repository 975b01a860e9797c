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

#include "dturbo/vbi_server.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace dturbo {

void ServerState::validate() const {
  const std::size_t nw = arch.weight_count();
  if (priors.size() != arch.num_layers()) {
    throw std::invalid_argument("ServerState: need one prior per layer");
  }
  if (pi_tilde.size() != nw || gamma_post.size() != nw || pi_prior.size() != nw ||
      downward.size() != nw || mu_global.size() != nw) {
    throw std::invalid_argument("ServerState: per-weight arrays misaligned with the network");
  }
  if (bias_global.size() != arch.bias_count()) {
    throw std::invalid_argument("ServerState: bias array misaligned with the network");
  }
  if (!(sigma_global > 0.0)) throw std::invalid_argument("ServerState: sigma_global must be positive");
}

ServerState init_server(const NetArch& arch, const HierPrior& prior, const ServerInit& init) {
  ServerState s;
  s.arch = arch;
  s.priors.assign(arch.num_layers(), prior);
  const std::size_t nw = arch.weight_count();
  s.pi_tilde.assign(nw, init.init_support);
  s.gamma_post.assign(nw, prior.active());
  s.pi_prior.assign(nw, 0.5);
  s.downward.assign(nw, BernoulliMessage::uniform());
  s.mu_global.resize(nw);
  s.bias_global.assign(arch.bias_count(), 0.0);
  s.sigma_global = init.init_sigma;

  std::mt19937_64 rng(init.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const auto& shape = arch.layers()[l];
    const double he = std::sqrt(2.0 / static_cast<double>(shape.rows));
    for (std::size_t i = 0; i < shape.size(); ++i) {
      s.mu_global[arch.weight_offset(l) + i] = init.init_scale * he * normal(rng);
    }
  }
  s.gamma_post = update_precision_posterior(s);
  return s;
}

namespace {

// E_q[ln Gamma(rho; g)] for q(rho) with the given moments.
double expected_log_gamma_density(const GammaParams& g, const GammaMoments& m) {
  return g.shape * std::log(g.rate) - log_gamma(g.shape) + (g.shape - 1.0) * m.mean_log -
         g.rate * m.mean;
}

template <typename Fn>
void for_each_weight(const ServerState& s, Fn&& fn) {
  for (std::size_t l = 0; l < s.arch.num_layers(); ++l) {
    const HierPrior& p = s.priors[l];
    const std::size_t begin = s.arch.weight_offset(l);
    const std::size_t end = s.arch.weight_offset(l + 1);
    for (std::size_t n = begin; n < end; ++n) fn(n, p);
  }
}

}  // namespace

double support_posterior(double pi_prior, const GammaParams& q_rho, const HierPrior& p) {
  if (pi_prior >= 1.0) return 1.0;
  if (pi_prior <= 0.0) return 0.0;
  const GammaMoments m = gamma_expectations(q_rho);
  const double log_c1 = std::log(pi_prior) + expected_log_gamma_density(p.active(), m);
  const double log_c2 = std::log1p(-pi_prior) + expected_log_gamma_density(p.inactive(), m);
  return logistic_of_difference(log_c1, log_c2);
}

GammaParams precision_posterior(double pi_tilde, double mu, double sigma, const HierPrior& p) {
  return {pi_tilde * p.a + (1.0 - pi_tilde) * p.a_bar + 1.0,
          mu * mu + sigma * sigma + pi_tilde * p.b + (1.0 - pi_tilde) * p.b_bar};
}

std::vector<double> update_support_posterior(const ServerState& state) {
  std::vector<double> out(state.pi_tilde.size());
  for_each_weight(state, [&](std::size_t n, const HierPrior& p) {
    out[n] = support_posterior(state.pi_prior[n], state.gamma_post[n], p);
  });
  return out;
}

std::vector<GammaParams> update_precision_posterior(const ServerState& state) {
  std::vector<GammaParams> out(state.gamma_post.size());
  for_each_weight(state, [&](std::size_t n, const HierPrior& p) {
    out[n] = precision_posterior(state.pi_tilde[n], state.mu_global[n], state.sigma_global, p);
  });
  return out;
}

std::vector<double> prior_std(const ServerState& state) {
  std::vector<double> out(state.gamma_post.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = std::sqrt(state.gamma_post[n].rate / state.gamma_post[n].shape);
  }
  return out;
}

Aggregate aggregate(std::span<const ClientUpload> uploads) {
  if (uploads.empty()) throw std::invalid_argument("aggregate: no uploads");
  double wsum = 0.0;
  for (const auto& u : uploads) {
    if (u.weight < 0.0) throw std::invalid_argument("aggregate: negative client weight");
    if (u.mu.size() != uploads[0].mu.size() || u.bias.size() != uploads[0].bias.size()) {
      throw std::invalid_argument("aggregate: uploads differ in length");
    }
    wsum += u.weight;
  }
  if (std::abs(wsum - 1.0) > kWeightSumTol) {
    throw std::invalid_argument("aggregate: client weights sum to " + std::to_string(wsum) +
                                ", expected 1");
  }
  Aggregate g;
  g.mu.assign(uploads[0].mu.size(), 0.0);
  g.bias.assign(uploads[0].bias.size(), 0.0);
  for (const auto& u : uploads) {
    for (std::size_t i = 0; i < g.mu.size(); ++i) g.mu[i] += u.weight * u.mu[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i) g.bias[i] += u.weight * u.bias[i];
    g.sigma += u.weight * u.sigma;
  }
  return g;
}

std::vector<BernoulliMessage> compute_upward_messages(std::span<const double> pi_tilde,
                                                      std::span<const BernoulliMessage> downward) {
  if (pi_tilde.size() != downward.size()) {
    throw std::invalid_argument("compute_upward_messages: length mismatch");
  }
  std::vector<BernoulliMessage> out(pi_tilde.size());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double q0 = std::max(1.0 - pi_tilde[n], kMessageFloor);
    const double q1 = std::max(pi_tilde[n], kMessageFloor);
    const double d0 = std::max(downward[n].v0, kMessageFloor);
    const double d1 = std::max(downward[n].v1, kMessageFloor);
    out[n] = BernoulliMessage::normalized(q0 / d0, q1 / d1);
  }
  return out;
}

std::vector<double> refresh_support_prior(std::span<const BernoulliMessage> extrinsic) {
  std::vector<double> out(extrinsic.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = extrinsic[n].p_active();
  return out;
}

std::vector<BernoulliMessage> run_support_prior(const ServerState& state,
                                                std::span<const BernoulliMessage> upward,
                                                const SpmpOptions& options,
                                                GridPassStats* stats) {
  if (upward.size() != state.arch.weight_count()) {
    throw std::invalid_argument("run_support_prior: message count does not match weights");
  }
  std::vector<BernoulliMessage> out(upward.size());
  GridPassStats local;
  for (std::size_t l = 0; l < state.arch.num_layers(); ++l) {
    const std::size_t begin = state.arch.weight_offset(l);
    const auto& shape = state.arch.layers()[l];
    const SupportGrid grid =
        build_grid(shape, state.priors[l], upward.subspan(begin, shape.size()));
    const SpmpResult r = run_spmp(grid, options);
    std::copy(r.extrinsic.begin(), r.extrinsic.end(), out.begin() + static_cast<long>(begin));
    local.max_iters_used = std::max(local.max_iters_used, r.iters_used);
    local.all_converged = local.all_converged && r.converged;
  }
  if (stats != nullptr) *stats = local;
  return out;
}

double bernoulli_kl(double q, double pi) {
  const auto term = [](double a, double b) {
    if (a <= 0.0) return 0.0;
    if (b <= 0.0) return std::numeric_limits<double>::infinity();
    return a * std::log(a / b);
  };
  return term(q, pi) + term(1.0 - q, 1.0 - pi);
}

NelbParts nelb(const ServerState& state, const Dataset& sample, double total_records,
               std::uint64_t seed) {
  state.validate();
  NelbParts parts;
  const double sig = state.sigma_global;
  for_each_weight(state, [&](std::size_t n, const HierPrior& p) {
    const GammaParams& q = state.gamma_post[n];
    const GammaMoments m = gamma_expectations(q);
    const double mu = state.mu_global[n];
    const double pt = state.pi_tilde[n];
    parts.gaussian += -0.5 - std::log(sig) - 0.5 * m.mean_log + 0.5 * m.mean * (mu * mu + sig * sig);
    parts.gamma += expected_log_gamma_density(q, m) -
                   pt * expected_log_gamma_density(p.active(), m) -
                   (1.0 - pt) * expected_log_gamma_density(p.inactive(), m);
    parts.bernoulli += bernoulli_kl(pt, state.pi_prior[n]);
  });
  if (!sample.empty() && total_records > 0.0) {
    const WeightNoise noise = draw_noise(state.mu_global.size(), seed);
    std::vector<double> w(state.mu_global.size());
    for (std::size_t n = 0; n < w.size(); ++n) w[n] = state.mu_global[n] + sig * noise.eps[n];
    const RowMatrix logits = forward_logits(state.arch, w, state.bias_global, sample.features);
    parts.data = total_records / static_cast<double>(sample.size()) *
                 cross_entropy_sum(logits, sample.labels);
  }
  return parts;
}

std::vector<std::uint8_t> active_mask(std::span<const double> pi_tilde) {
  std::vector<std::uint8_t> m(pi_tilde.size());
  for (std::size_t n = 0; n < m.size(); ++n) m[n] = pi_tilde[n] >= 0.5 ? 1 : 0;
  return m;
}

}  // namespace dturbo
