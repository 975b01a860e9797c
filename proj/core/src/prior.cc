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

#include "dturbo/prior.hpp"

#include <cmath>
#include <sstream>

namespace dturbo {

TransitionMatrix TransitionMatrix::from_stay(double stay_inactive, double stay_active) {
  TransitionMatrix t;
  t.p = {{{stay_inactive, 1.0 - stay_inactive}, {1.0 - stay_active, stay_active}}};
  return t;
}

namespace {

void check_transition(const TransitionMatrix& t, const char* name, double tol,
                      std::vector<std::string>& out) {
  for (int from = 0; from < 2; ++from) {
    for (int to = 0; to < 2; ++to) {
      const double v = t.at(from, to);
      if (!(v >= 0.0 && v <= 1.0)) {
        out.push_back(std::string(name) + " entry out of [0, 1]");
        return;
      }
    }
    if (std::abs(t.at(from, 0) + t.at(from, 1) - 1.0) > tol) {
      out.push_back(std::string(name) + " not row-stochastic");
      return;
    }
  }
}

}  // namespace

std::vector<std::string> prior_violations(const HierPrior& p, const PriorBounds& bounds) {
  std::vector<std::string> out;
  const auto positive = [&](double v, const char* name) {
    if (!(v > 0.0)) out.push_back(std::string(name) + " must be positive");
    return v > 0.0;
  };
  const bool ok_a = positive(p.a, "a");
  const bool ok_b = positive(p.b, "b");
  const bool ok_ab = positive(p.a_bar, "a_bar");
  const bool ok_bb = positive(p.b_bar, "b_bar");
  if (ok_a && ok_b && p.a / p.b > bounds.max_active_mean) {
    out.push_back("a/b above active-precision bound");
  }
  if (ok_ab && ok_bb && p.a_bar / p.b_bar < bounds.min_inactive_mean) {
    out.push_back("a_bar/b_bar below sparsity bound");
  }
  check_transition(p.row_transition, "row_transition", bounds.stochastic_tol, out);
  check_transition(p.col_transition, "col_transition", bounds.stochastic_tol, out);
  if (!(p.init_active >= 0.0 && p.init_active <= 1.0)) {
    out.push_back("init_active must lie in [0, 1]");
  }
  return out;
}

HierPrior validate_prior(const HierPrior& p, const PriorBounds& bounds) {
  const auto violations = prior_violations(p, bounds);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "invalid prior:";
    for (const auto& v : violations) msg << ' ' << v << ';';
    throw ConfigError(msg.str());
  }
  return p;
}

double log_prior_density_rho(double rho, int s, const HierPrior& p) {
  return s == 1 ? gamma_log_density(rho, p.active()) : gamma_log_density(rho, p.inactive());
}

}  // namespace dturbo
