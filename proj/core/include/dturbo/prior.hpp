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

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dturbo/special_math.hpp"

namespace dturbo {

/// Raised for invalid user-supplied configuration. The message names the
/// offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape of one weight matrix: rows = fan-in, cols = fan-out. Weights are
/// stored row-major, so weight (r, c) has flat index r * cols + c.
struct LayerShape {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  bool operator==(const LayerShape&) const = default;
};

/// 2x2 conditional table: at(from, to) = p(next = to | current = from).
struct TransitionMatrix {
  std::array<std::array<double, 2>, 2> p{{{0.7, 0.3}, {0.3, 0.7}}};

  double at(int from, int to) const { return p[from][to]; }
  /// Symmetric-in-form table from the two "stay" probabilities.
  static TransitionMatrix from_stay(double stay_inactive, double stay_active);
};

/// Hierarchical prior of one layer: the spike/slab Gamma hyperparameters on
/// the precision and the grid Markov parameters of the support.
struct HierPrior {
  double a = 0.1;       // shape, active
  double b = 0.1;       // rate, active
  double a_bar = 2.0;   // shape, inactive
  double b_bar = 0.01;  // rate, inactive
  TransitionMatrix row_transition;  // along a row, left -> right
  TransitionMatrix col_transition;  // along a column, top -> bottom
  double init_active = 0.5;

  GammaParams active() const { return {a, b}; }
  GammaParams inactive() const { return {a_bar, b_bar}; }
};

struct PriorBounds {
  double max_active_mean = 10.0;     // a / b <= this
  double min_inactive_mean = 100.0;  // a_bar / b_bar >= this
  double stochastic_tol = 1e-12;
};

/// Every violated invariant, one human-readable line each. Empty when valid.
std::vector<std::string> prior_violations(const HierPrior& p, const PriorBounds& bounds = {});

/// Returns `p` unchanged when valid; otherwise throws ConfigError listing all
/// violations.
HierPrior validate_prior(const HierPrior& p, const PriorBounds& bounds = {});

/// ln p(rho | s) under the Gamma selected by the support value.
double log_prior_density_rho(double rho, int s, const HierPrior& p);

}  // namespace dturbo
