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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "dturbo/oracles.hpp"
#include "dturbo/special_math.hpp"
#include "test_util.hpp"

namespace dturbo {
namespace {

using testing::load_fixture;
using testing::rel_diff;

TEST(Digamma, MatchesHighPrecisionValues) {
  const auto fx = load_fixture("math_values.json");
  for (const auto& [x, v] : fx["digamma"].items()) {
    const double got = digamma(std::stod(x));
    EXPECT_LT(std::abs(got - v.get<double>()), 1e-13 * std::max(1.0, std::abs(v.get<double>()))) << x;
  }
}

TEST(Digamma, AgreesWithFiniteDifferenceOracle) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> logx(std::log(0.02), std::log(5000.0));
  for (int i = 0; i < 200; ++i) {
    const double x = std::exp(logx(g));
    EXPECT_NEAR(digamma(x), oracle::digamma_fd(x), 1e-7 * std::max(1.0, std::abs(digamma(x)))) << x;
  }
}

TEST(Digamma, RejectsNonPositive) {
  EXPECT_THROW(digamma(0.0), std::domain_error);
  EXPECT_THROW(digamma(-1.5), std::domain_error);
}

TEST(LogGamma, MatchesHighPrecisionValues) {
  const auto fx = load_fixture("math_values.json");
  for (const auto& [x, v] : fx["lgamma"].items()) {
    EXPECT_LT(std::abs(log_gamma(std::stod(x)) - v.get<double>()), 1e-12 * std::max(1.0, std::abs(v.get<double>())))
        << x;
  }
}

TEST(GammaExpectations, LargeShape) {
  const auto fx = load_fixture("math_values.json")["gamma_expectations"];
  const auto m = gamma_expectations({fx["shape"].get<double>(), fx["rate"].get<double>()});
  EXPECT_DOUBLE_EQ(m.mean, 100.0);
  EXPECT_NEAR(m.mean_log, fx["mean_log"].get<double>(), 1e-13);
  EXPECT_NEAR(m.mean_log, std::log(100.0) - 1.0 / 200.0, 1e-4);
}

TEST(GammaExpectations, MeanLogBelowLogMean) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0.01, 50.0);
  for (int i = 0; i < 100; ++i) {
    const GammaParams p(u(g), u(g));
    const auto m = gamma_expectations(p);
    EXPECT_LT(m.mean_log, std::log(m.mean));
  }
}

TEST(KlGauss, ReferenceValue) {
  const auto fx = load_fixture("math_values.json")["kl_gauss_to_centered"];
  const double got = kl_gauss_to_centered({0.5, 0.3}, 2.0);
  EXPECT_NEAR(got, fx["value"].get<double>(), 1e-14);
  EXPECT_NEAR(got, std::log(2.0 / 0.3) + (0.09 + 0.25) / 8.0 - 0.5, 1e-14);
}

TEST(KlGauss, ZeroAtPriorAndNonNegative) {
  EXPECT_EQ(kl_gauss_to_centered({0.0, 1.7}, 1.7), 0.0);
  std::mt19937_64 g(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    EXPECT_GE(kl_gauss_to_centered({n(g), std::exp(n(g))}, std::exp(n(g))), 0.0);
  }
}

TEST(GammaLogDensity, LogSpaceEvaluation) {
  const auto fx = load_fixture("math_values.json")["gamma_log_density"];
  const double got = gamma_log_density(50.0, {100.0, 1.0});
  EXPECT_LT(rel_diff(got, fx["value"].get<double>()), 1e-13);
  EXPECT_TRUE(std::isfinite(gamma_log_density(1e-300, {0.5, 1.0})));
  EXPECT_TRUE(std::isfinite(gamma_log_density(1e5, {1e4, 1.0})));
}

TEST(Params, InvalidArgumentsThrow) {
  EXPECT_THROW(GammaParams(0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(GammaParams(1.0, -1.0), std::invalid_argument);
  EXPECT_THROW(GaussianParams(0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(BernoulliParams(1.5), std::invalid_argument);
  EXPECT_NO_THROW(BernoulliParams(0.0));
  EXPECT_NO_THROW(BernoulliParams(1.0));
}

TEST(LogSumExp, StableForLargeInputs) {
  const std::vector<double> xs{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(xs), 1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> ys{-1000.0, -1001.0};
  EXPECT_NEAR(log_sum_exp(ys), -1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_EQ(log_sum_exp({}), -std::numeric_limits<double>::infinity());
}

TEST(LogisticOfDifference, Extremes) {
  EXPECT_DOUBLE_EQ(logistic_of_difference(0.0, 0.0), 0.5);
  EXPECT_NEAR(logistic_of_difference(800.0, 0.0), 1.0, 1e-15);
  EXPECT_NEAR(logistic_of_difference(0.0, 800.0), 0.0, 1e-15);
  EXPECT_NEAR(logistic_of_difference(std::log(3.0), std::log(1.0)), 0.75, 1e-15);
}

}  // namespace
}  // namespace dturbo
