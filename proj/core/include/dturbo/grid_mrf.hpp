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
// Support prior on a K x M weight grid and sum-product message passing over
// it. The grid is a pairwise MRF: horizontal edges carry the row transition
// table as phi(s_left, s_right) = p(s_right | s_left), vertical edges carry the
// column table as phi(s_top, s_bottom). Node (0, 0) also carries the initial
// activation probability.

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "dturbo/prior.hpp"
#include "dturbo/special_math.hpp"

namespace dturbo {

/// Two-valued nonnegative message over a binary support, kept normalized.
struct BernoulliMessage {
  double v0 = 0.5;
  double v1 = 0.5;

  /// Normalizes (v0, v1); throws std::invalid_argument if either is negative
  /// or both are zero.
  static BernoulliMessage normalized(double v0, double v1);
  static BernoulliMessage uniform() { return {0.5, 0.5}; }

  double p_active() const { return v1 / (v0 + v1); }
};

/// Smallest component value allowed in a message that is later divided by.
inline constexpr double kMessageFloor = 1e-12;

using Potential2 = std::array<std::array<double, 2>, 2>;

class SupportGrid {
 public:
  SupportGrid(LayerShape shape, std::vector<BernoulliMessage> unary, Potential2 horizontal,
              Potential2 vertical, double init_active);

  const LayerShape& shape() const { return shape_; }
  std::size_t node_count() const { return shape_.size(); }
  std::size_t horizontal_edge_count() const { return shape_.rows * (shape_.cols - 1); }
  std::size_t vertical_edge_count() const { return (shape_.rows - 1) * shape_.cols; }
  std::size_t edge_count() const { return horizontal_edge_count() + vertical_edge_count(); }

  std::span<const BernoulliMessage> unary() const { return unary_; }
  const Potential2& horizontal() const { return horizontal_; }
  const Potential2& vertical() const { return vertical_; }

  /// Node factor owned by the grid prior itself (non-uniform only at (0, 0)).
  std::array<double, 2> node_prior(std::size_t node) const;

 private:
  LayerShape shape_;
  std::vector<BernoulliMessage> unary_;
  Potential2 horizontal_;
  Potential2 vertical_;
  double init_active_;
};

/// Grid for one layer with the given incoming messages (row-major order).
/// Throws std::invalid_argument on a length mismatch or a non-positive
/// transition entry.
SupportGrid build_grid(const LayerShape& shape, const HierPrior& prior,
                       std::span<const BernoulliMessage> inputs);

struct SpmpOptions {
  int max_iters = 50;
  double damping = 0.5;  // weight on the previous message, in [0, 1)
  double tol = 1e-6;     // stop when max message change drops below this
};

struct SpmpResult {
  std::vector<BernoulliParams> marginals;
  /// Marginal with the node's own unary input divided out.
  std::vector<BernoulliMessage> extrinsic;
  int iters_used = 0;
  bool converged = false;
  double final_change = 0.0;
};

/// Loopy sum-product with a flooding schedule and damped messages.
/// Non-convergence at max_iters is reported through `converged`.
SpmpResult run_spmp(const SupportGrid& grid, const SpmpOptions& options = {});

/// Exact node marginals by summing the joint over all 2^(K*M) support
/// configurations. Throws std::invalid_argument when K*M > 20.
std::vector<BernoulliParams> enumerate_exact(const SupportGrid& grid);

inline constexpr std::size_t kMaxEnumerationNodes = 20;

}  // namespace dturbo
