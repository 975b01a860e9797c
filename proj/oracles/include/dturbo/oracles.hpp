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
// Reference implementations used to check the library. Everything here is
// written with plain loops, long double accumulation and std::lgamma so that
// it shares no numerical code path with dturbo_core. Only the plain data
// types (GammaParams, HierPrior, NetArch, ...) are borrowed.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dturbo/bayes_nn.hpp"
#include "dturbo/codec.hpp"
#include "dturbo/prior.hpp"
#include "dturbo/special_math.hpp"
#include "dturbo/vbi_server.hpp"

namespace dturbo::oracle {

/// psi(x) from Richardson-extrapolated central differences of std::lgamma.
/// About 1e-10 absolute for x in [1e-2, 1e4].
double digamma_fd(double x);

/// E_q[ln Gamma(rho; shape, rate)] for q = Gamma(q_shape, q_rate).
long double expected_log_gamma(double shape, double rate, double q_shape, double q_rate);

// ---------------------------------------------------------------------------
// Support block: KL(q(s) || exp<ln p(rho|s) p_hat(s)>_q(rho)) for one weight,
// dropping the normalizer of the target (constant in q).

double support_objective(double q_active, double pi_prior, const GammaParams& q_rho,
                         const HierPrior& prior);

struct GridMin1 {
  double arg = 0.0;
  double value = 0.0;
};

/// Minimum of support_objective over q in {0, 1/(points-1), ..., 1}.
GridMin1 support_grid_min(double pi_prior, const GammaParams& q_rho, const HierPrior& prior,
                          std::size_t points = 1001);

// ---------------------------------------------------------------------------
// Precision block: KL(q(rho) || exp<ln p(w|rho) p(rho|s)>_q(s)q(w)) with
// p(w | rho) = N(w; 0, 1/rho), up to a constant.

double precision_objective(const GammaParams& q_rho, double q_active, double mu, double sigma,
                           const HierPrior& prior);

/// The minimizer of precision_objective: a Gamma with shape
/// q a + (1-q) a_bar + 1/2 and rate q b + (1-q) b_bar + (mu^2 + sigma^2) / 2.
GammaParams precision_minimizer(double q_active, double mu, double sigma, const HierPrior& prior);

struct GridMin2 {
  double shape = 0.0;
  double rate = 0.0;
  double value = 0.0;
};

/// points x points grid, log-spaced over [center / span, center * span] on
/// each axis.
GridMin2 precision_grid_min(const GammaParams& center, double span, std::size_t points,
                            double q_active, double mu, double sigma, const HierPrior& prior);

// ---------------------------------------------------------------------------
// Network loss and finite differences.

/// Logits for every row of `x`, plain loops, long double.
std::vector<std::vector<long double>> plain_logits(const NetArch& arch, std::span<const double> weights,
                                                   std::span<const double> bias, const Dataset& x);

/// The client loss: sum of Gaussian KLs to N(0, prior_std^2), 0.5 * sum b^2,
/// and (global records / batch size) * cross-entropy under w = mu + sigma eps.
long double plain_loss(const VariationalNetState& state, const Dataset& batch, const DataScale& scale,
                       std::span<const double> eps);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;                 // "mu[17]", "bias[3]" or "sigma"
  std::size_t checked = 0;
  std::size_t skipped_at_kinks = 0;  // a ReLU changed sign inside [x-h, x+h]
};

/// Central differences of plain_loss with step h against `analytic`, over every
/// coordinate. Relative error is |a - fd| / max(|a|, |fd|, abs_floor).
GradCheckReport check_gradients(const VariationalNetState& state, const Dataset& batch,
                                const DataScale& scale, std::span<const double> eps,
                                const Gradients& analytic, double h = 1e-4, double abs_floor = 1e-6);

// ---------------------------------------------------------------------------
// Negative evidence lower bound, evaluated term by term.

struct NelbTerms {
  long double gaussian = 0.0L;
  long double gamma = 0.0L;
  long double bernoulli = 0.0L;
  long double data = 0.0L;
  long double total() const { return gaussian + gamma + bernoulli + data; }
};

NelbTerms plain_nelb(const ServerState& state, const Dataset& sample, double total_records,
                     std::span<const double> eps);

// ---------------------------------------------------------------------------
// Combinatorial oracles.

/// Greedy rectangle cover by exhaustive search: each step scans every
/// all-active rectangle of the remaining mask with both sides > min_side and
/// takes the largest (ties: top row, then left column, then taller). Leftover
/// cells become singletons in row-major order. Intended for masks up to
/// about 16 x 16.
ClusterMask brute_force_clusters(const LayerShape& shape, std::span<const std::uint8_t> mask,
                                 std::size_t min_side);

/// Indices of the ceil(k * n) largest |x| by full sort, ties to the lower index,
/// returned ascending.
std::vector<std::size_t> sorted_topk(std::span<const double> x, double k_fraction);

/// Exact node marginals p(s = 1) of the grid model by summing all 2^(rows*cols)
/// configurations in long double. Refuses more than 20 nodes.
std::vector<double> brute_force_marginals(const LayerShape& shape, const HierPrior& prior,
                                          std::span<const double> unary_active);

// ---------------------------------------------------------------------------
// Seeded inputs shared with the Python fixture scripts.

/// SplitMix64 stream mapped to [lo, hi): u = lo + (hi - lo) * (x >> 11) / 2^53.
/// tests/scripts/fixtures.py implements the same stream.
std::vector<double> fixture_uniforms(std::uint64_t seed, std::size_t n, double lo, double hi);

struct GradCase {
  VariationalNetState state;
  Dataset batch;
  DataScale scale;
  std::vector<double> eps;
};

/// A random point for gradient checks: means ~ 0.2 N(0, 1), biases ~ 0.1 N(0, 1),
/// log prior std ~ 0.5 N(0, 1), sigma in [0.01, 0.11), Gaussian inputs with
/// random labels, client weight 0.1 of 500 local records.
GradCase random_grad_case(const NetArch& arch, std::uint64_t seed, std::size_t batch_size = 16);

}  // namespace dturbo::oracle
