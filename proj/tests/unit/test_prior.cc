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

#include <algorithm>

#include "dturbo/prior.hpp"

namespace dturbo {
namespace {

bool mentions(const std::vector<std::string>& v, const std::string& what) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(what) != std::string::npos; });
}

TEST(HierPrior, DefaultsAreValid) {
  const HierPrior p;
  EXPECT_TRUE(prior_violations(p).empty());
  EXPECT_LE(p.a / p.b, 10.0);
  EXPECT_GE(p.a_bar / p.b_bar, 100.0);
}

TEST(HierPrior, NonPositiveFieldsNamed) {
  HierPrior p;
  p.a = 0.0;
  p.b_bar = -1.0;
  const auto v = prior_violations(p);
  EXPECT_TRUE(mentions(v, "a must be positive"));
  EXPECT_TRUE(mentions(v, "b_bar must be positive"));
  EXPECT_THROW(validate_prior(p), ConfigError);
}

TEST(HierPrior, MagnitudeBounds) {
  HierPrior p;
  p.a = 20.0;
  p.b = 1.0;
  EXPECT_TRUE(mentions(prior_violations(p), "a/b"));
  HierPrior q;
  q.a_bar = 10.0;
  q.b_bar = 1.0;
  EXPECT_TRUE(mentions(prior_violations(q), "a_bar/b_bar"));
  PriorBounds loose;
  loose.min_inactive_mean = 5.0;
  EXPECT_TRUE(prior_violations(q, loose).empty());
}

TEST(HierPrior, TransitionsMustBeStochastic) {
  HierPrior p;
  p.row_transition.p[0][0] = 0.5;  // row sums to 0.8
  EXPECT_TRUE(mentions(prior_violations(p), "row_transition"));
  HierPrior q;
  q.col_transition.p[1][1] = 1.2;
  q.col_transition.p[1][0] = -0.2;
  EXPECT_TRUE(mentions(prior_violations(q), "col_transition"));
  HierPrior r;
  r.init_active = 1.5;
  EXPECT_TRUE(mentions(prior_violations(r), "init_active"));
}

TEST(TransitionMatrix, FromStay) {
  const auto t = TransitionMatrix::from_stay(0.9, 0.6);
  EXPECT_DOUBLE_EQ(t.at(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(t.at(0, 1), 0.1);
  EXPECT_DOUBLE_EQ(t.at(1, 0), 1.0 - 0.6);
  EXPECT_DOUBLE_EQ(t.at(1, 1), 0.6);
}

TEST(LogPriorDensity, PicksTheComponent) {
  HierPrior p;
  EXPECT_DOUBLE_EQ(log_prior_density_rho(3.0, 1, p), gamma_log_density(3.0, p.active()));
  EXPECT_DOUBLE_EQ(log_prior_density_rho(3.0, 0, p), gamma_log_density(3.0, p.inactive()));
  // The inactive component favors large precisions.
  EXPECT_GT(log_prior_density_rho(500.0, 0, p), log_prior_density_rho(500.0, 1, p));
}

}  // namespace
}  // namespace dturbo
