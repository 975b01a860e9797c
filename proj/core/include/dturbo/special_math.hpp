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

#pragma once

#include <span>

namespace dturbo {

/// Gamma distribution in shape/rate form. Used both for priors on the weight
/// precision and for the variational posterior q(rho).
struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;

  GammaParams() = default;
  /// Throws std::invalid_argument unless shape > 0 and rate > 0.
  GammaParams(double shape, double rate);
};

struct GaussianParams {
  double mean = 0.0;
  double std = 1.0;

  GaussianParams() = default;
  /// Throws std::invalid_argument unless std > 0.
  GaussianParams(double mean, double std);
};

struct BernoulliParams {
  double p_active = 0.5;

  BernoulliParams() = default;
  /// Throws std::invalid_argument unless 0 <= p_active <= 1.
  explicit BernoulliParams(double p_active);
};

struct GammaMoments {
  double mean = 0.0;      // <rho>
  double mean_log = 0.0;  // <ln rho>
};

/// psi(x) = d/dx ln Gamma(x). Shifts x up to >= 6 with the recurrence, then
/// applies the asymptotic series. Throws std::domain_error for x <= 0.
double digamma(double x);

/// ln Gamma(x) for x > 0. Thread-safe (does not touch signgam).
double log_gamma(double x);

/// <rho> = shape/rate and <ln rho> = psi(shape) - ln(rate).
GammaMoments gamma_expectations(const GammaParams& g);

/// KL( N(mu, sigma^2) || N(0, prior_std^2) ).
double kl_gauss_to_centered(const GaussianParams& q, double prior_std);

/// ln of the Gamma(shape, rate) density at rho.
double gamma_log_density(double rho, const GammaParams& g);

/// ln(sum_i exp(x_i)); returns -inf for an empty span.
double log_sum_exp(std::span<const double> xs);

/// exp(a) / (exp(a) + exp(b)) evaluated without overflow.
double logistic_of_difference(double log_a, double log_b);

}  // namespace dturbo
