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

#include "dturbo/special_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dturbo {

GammaParams::GammaParams(double shape_, double rate_) : shape(shape_), rate(rate_) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("GammaParams: shape and rate must be positive (got shape=" +
                                std::to_string(shape) + ", rate=" + std::to_string(rate) + ")");
  }
}

GaussianParams::GaussianParams(double mean_, double std_) : mean(mean_), std(std_) {
  if (!(std > 0.0)) {
    throw std::invalid_argument("GaussianParams: std must be positive");
  }
}

BernoulliParams::BernoulliParams(double p) : p_active(p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("BernoulliParams: p_active must lie in [0, 1]");
  }
}

double digamma(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("digamma: argument must be positive");
  }
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion in 1/x^2 with Bernoulli-number coefficients.
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
  return shift + std::log(x) - 0.5 * inv - series;
}

double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("log_gamma: argument must be positive");
  }
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

GammaMoments gamma_expectations(const GammaParams& g) {
  return {g.shape / g.rate, digamma(g.shape) - std::log(g.rate)};
}

double kl_gauss_to_centered(const GaussianParams& q, double prior_std) {
  const double s2 = prior_std * prior_std;
  return std::log(prior_std / q.std) + (q.std * q.std + q.mean * q.mean) / (2.0 * s2) - 0.5;
}

double gamma_log_density(double rho, const GammaParams& g) {
  return g.shape * std::log(g.rate) - log_gamma(g.shape) + (g.shape - 1.0) * std::log(rho) -
         g.rate * rho;
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : xs) acc += std::exp(v - m);
  return m + std::log(acc);
}

double logistic_of_difference(double log_a, double log_b) {
  if (log_a == -std::numeric_limits<double>::infinity()) return 0.0;
  if (log_b == -std::numeric_limits<double>::infinity()) return 1.0;
  const double d = log_b - log_a;
  if (d > 0.0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

}  // namespace dturbo
