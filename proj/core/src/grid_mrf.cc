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

#include "dturbo/grid_mrf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dturbo {

BernoulliMessage BernoulliMessage::normalized(double v0, double v1) {
  if (!(v0 >= 0.0) || !(v1 >= 0.0) || !(v0 + v1 > 0.0)) {
    throw std::invalid_argument("BernoulliMessage: components must be nonnegative, not both zero");
  }
  const double z = v0 + v1;
  return {v0 / z, v1 / z};
}

SupportGrid::SupportGrid(LayerShape shape, std::vector<BernoulliMessage> unary,
                         Potential2 horizontal, Potential2 vertical, double init_active)
    : shape_(shape),
      unary_(std::move(unary)),
      horizontal_(horizontal),
      vertical_(vertical),
      init_active_(init_active) {
  if (shape_.rows == 0 || shape_.cols == 0) {
    throw std::invalid_argument("SupportGrid: empty shape");
  }
  if (unary_.size() != shape_.size()) {
    throw std::invalid_argument("SupportGrid: expected " + std::to_string(shape_.size()) +
                                " unary inputs, got " + std::to_string(unary_.size()));
  }
  for (const auto* pot : {&horizontal_, &vertical_}) {
    for (const auto& row : *pot) {
      for (double v : row) {
        if (!(v > 0.0)) throw std::invalid_argument("SupportGrid: potentials must be positive");
      }
    }
  }
}

std::array<double, 2> SupportGrid::node_prior(std::size_t node) const {
  if (node == 0) return {1.0 - init_active_, init_active_};
  return {1.0, 1.0};
}

SupportGrid build_grid(const LayerShape& shape, const HierPrior& prior,
                       std::span<const BernoulliMessage> inputs) {
  return SupportGrid(shape, std::vector<BernoulliMessage>(inputs.begin(), inputs.end()),
                     prior.row_transition.p, prior.col_transition.p, prior.init_active);
}

namespace {

// Incoming message slots, named by where the message comes from.
enum Dir : int { kFromLeft = 0, kFromRight = 1, kFromAbove = 2, kFromBelow = 3 };

using Msg = std::array<double, 2>;

inline Msg normalize(Msg m) {
  const double z = m[0] + m[1];
  m[0] /= z;
  m[1] /= z;
  // Keep strictly positive so later products never collapse to (0, 0).
  constexpr double kTiny = 1e-300;
  m[0] = std::max(m[0], kTiny);
  m[1] = std::max(m[1], kTiny);
  return m;
}

// sum_{s_from} belief(s_from) * phi(s_from, s_to), phi oriented from -> to.
inline Msg pass_forward(const Msg& belief, const Potential2& phi) {
  return {belief[0] * phi[0][0] + belief[1] * phi[1][0],
          belief[0] * phi[0][1] + belief[1] * phi[1][1]};
}

// Message against the potential's orientation: sum_{s_to} belief(s_to) * phi(s_from, s_to).
inline Msg pass_backward(const Msg& belief, const Potential2& phi) {
  return {belief[0] * phi[0][0] + belief[1] * phi[0][1],
          belief[0] * phi[1][0] + belief[1] * phi[1][1]};
}

struct MessageField {
  std::array<std::vector<Msg>, 4> in;

  explicit MessageField(std::size_t n) {
    for (auto& v : in) v.assign(n, Msg{0.5, 0.5});
  }
};

}  // namespace

SpmpResult run_spmp(const SupportGrid& grid, const SpmpOptions& options) {
  if (!(options.damping >= 0.0 && options.damping < 1.0)) {
    throw std::invalid_argument("run_spmp: damping must lie in [0, 1)");
  }
  if (options.max_iters < 0) throw std::invalid_argument("run_spmp: max_iters must be >= 0");

  const std::size_t rows = grid.shape().rows;
  const std::size_t cols = grid.shape().cols;
  const std::size_t n = grid.node_count();
  const auto unary = grid.unary();
  const auto& H = grid.horizontal();
  const auto& V = grid.vertical();

  std::vector<Msg> local(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto prior = grid.node_prior(i);
    local[i] = normalize({prior[0] * unary[i].v0, prior[1] * unary[i].v1});
  }

  MessageField cur(n);
  MessageField next(n);

  // Belief at node i from its local factor and every incoming message except `skip`.
  const auto cavity = [&](const MessageField& f, std::size_t i, int skip) {
    Msg b = local[i];
    for (int d = 0; d < 4; ++d) {
      if (d == skip) continue;
      b[0] *= f.in[d][i][0];
      b[1] *= f.in[d][i][1];
    }
    return normalize(b);
  };

  SpmpResult result;
  const double keep = options.damping;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    double change = 0.0;
    const auto update = [&](int slot, std::size_t target, const Msg& computed) {
      const Msg fresh = normalize(computed);
      const Msg& old = cur.in[slot][target];
      const Msg damped =
          normalize({keep * old[0] + (1.0 - keep) * fresh[0], keep * old[1] + (1.0 - keep) * fresh[1]});
      change = std::max(change, std::max(std::abs(damped[0] - old[0]), std::abs(damped[1] - old[1])));
      next.in[slot][target] = damped;
    };

    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        if (c + 1 < cols) update(kFromLeft, i + 1, pass_forward(cavity(cur, i, kFromRight), H));
        if (c > 0) update(kFromRight, i - 1, pass_backward(cavity(cur, i, kFromLeft), H));
        if (r + 1 < rows) update(kFromAbove, i + cols, pass_forward(cavity(cur, i, kFromBelow), V));
        if (r > 0) update(kFromBelow, i - cols, pass_backward(cavity(cur, i, kFromAbove), V));
      }
    }
    std::swap(cur, next);
    result.iters_used = iter + 1;
    result.final_change = change;
    if (change < options.tol) {
      result.converged = true;
      break;
    }
  }
  if (options.max_iters == 0 || grid.edge_count() == 0) result.converged = true;

  result.marginals.resize(n);
  result.extrinsic.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto prior = grid.node_prior(i);
    double e0 = prior[0];
    double e1 = prior[1];
    for (int d = 0; d < 4; ++d) {
      e0 *= cur.in[d][i][0];
      e1 *= cur.in[d][i][1];
    }
    double z = e0 + e1;
    e0 = std::max(e0 / z, kMessageFloor);
    e1 = std::max(e1 / z, kMessageFloor);
    z = e0 + e1;
    const BernoulliMessage ext{e0 / z, e1 / z};
    result.extrinsic[i] = ext;
    const double m0 = ext.v0 * unary[i].v0;
    const double m1 = ext.v1 * unary[i].v1;
    result.marginals[i] = BernoulliParams(m1 / (m0 + m1));
  }
  return result;
}

std::vector<BernoulliParams> enumerate_exact(const SupportGrid& grid) {
  const std::size_t n = grid.node_count();
  if (n > kMaxEnumerationNodes) {
    throw std::invalid_argument("enumerate_exact: grid has " + std::to_string(n) +
                                " nodes, refusing to enumerate more than " +
                                std::to_string(kMaxEnumerationNodes));
  }
  const std::size_t rows = grid.shape().rows;
  const std::size_t cols = grid.shape().cols;
  const auto unary = grid.unary();
  const auto& H = grid.horizontal();
  const auto& V = grid.vertical();

  std::vector<long double> active_mass(n, 0.0L);
  long double total = 0.0L;
  const std::size_t configs = std::size_t{1} << n;
  for (std::size_t cfg = 0; cfg < configs; ++cfg) {
    const auto s = [&](std::size_t i) { return static_cast<int>((cfg >> i) & 1U); };
    long double w = 1.0L;
    for (std::size_t i = 0; i < n; ++i) {
      const auto prior = grid.node_prior(i);
      w *= s(i) ? prior[1] * unary[i].v1 : prior[0] * unary[i].v0;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        if (c + 1 < cols) w *= H[s(i)][s(i + 1)];
        if (r + 1 < rows) w *= V[s(i)][s(i + cols)];
      }
    }
    total += w;
    for (std::size_t i = 0; i < n; ++i) {
      if (s(i)) active_mass[i] += w;
    }
  }
  std::vector<BernoulliParams> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace_back(static_cast<double>(active_mass[i] / total));
  }
  return out;
}

}  // namespace dturbo
