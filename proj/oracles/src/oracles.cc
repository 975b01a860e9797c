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

#include "dturbo/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dturbo::oracle {

namespace {

using LD = long double;

LD xlogx(LD x) { return x > 0.0L ? x * std::log(x) : 0.0L; }

// Activations of every layer for one input row; pre-activation signs go to
// `signs` when it is non-null.
std::vector<LD> forward_row(const NetArch& arch, std::span<const double> w, std::span<const double> bias,
                            const Dataset& x, std::size_t row, std::vector<signed char>* signs) {
  std::vector<LD> a(arch.input_dim());
  for (std::size_t j = 0; j < a.size(); ++j) {
    a[j] = x.features(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j));
  }
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const LayerShape s = arch.layers()[l];
    const std::size_t wo = arch.weight_offset(l);
    const std::size_t bo = arch.bias_offset(l);
    std::vector<LD> z(s.cols);
    for (std::size_t c = 0; c < s.cols; ++c) {
      LD acc = bias[bo + c];
      for (std::size_t r = 0; r < s.rows; ++r) acc += a[r] * static_cast<LD>(w[wo + r * s.cols + c]);
      z[c] = acc;
    }
    if (l + 1 < arch.num_layers()) {
      for (auto& v : z) {
        if (signs) signs->push_back(v > 0.0L ? 1 : (v < 0.0L ? -1 : 0));
        v = v > 0.0L ? v : 0.0L;
      }
    }
    a = std::move(z);
  }
  return a;
}

LD row_cross_entropy(const std::vector<LD>& logits, int label) {
  const LD m = *std::max_element(logits.begin(), logits.end());
  LD s = 0.0L;
  for (LD v : logits) s += std::exp(v - m);
  return m + std::log(s) - logits[static_cast<std::size_t>(label)];
}

// Data term and, optionally, the ReLU sign pattern of the whole batch.
LD data_term(const NetArch& arch, std::span<const double> w, std::span<const double> bias,
             const Dataset& batch, LD factor, std::vector<signed char>* signs) {
  LD ce = 0.0L;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ce += row_cross_entropy(forward_row(arch, w, bias, batch, i, signs), batch.labels[i]);
  }
  return factor * ce;
}

}  // namespace

double digamma_fd(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma_fd: x must be positive");
  // Four-level Richardson table on the central difference.
  auto central = [x](double h) { return (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h); };
  double h = std::min(0.05, 0.25 * x);
  double t[4][4];
  for (int i = 0; i < 4; ++i) {
    t[i][0] = central(h);
    double f = 4.0;
    for (int j = 1; j <= i; ++j) {
      t[i][j] = t[i][j - 1] + (t[i][j - 1] - t[i - 1][j - 1]) / (f - 1.0);
      f *= 4.0;
    }
    h *= 0.5;
  }
  return t[3][3];
}

long double expected_log_gamma(double shape, double rate, double q_shape, double q_rate) {
  const LD mean = static_cast<LD>(q_shape) / q_rate;
  const LD mean_log = static_cast<LD>(digamma_fd(q_shape)) - std::log(static_cast<LD>(q_rate));
  return shape * std::log(static_cast<LD>(rate)) - std::lgamma(static_cast<LD>(shape)) +
         (shape - 1.0L) * mean_log - rate * mean;
}

double support_objective(double q_active, double pi_prior, const GammaParams& q_rho,
                         const HierPrior& prior) {
  const LD log_on = std::log(static_cast<LD>(pi_prior)) +
                    expected_log_gamma(prior.a, prior.b, q_rho.shape, q_rho.rate);
  const LD log_off = std::log(1.0L - pi_prior) +
                     expected_log_gamma(prior.a_bar, prior.b_bar, q_rho.shape, q_rho.rate);
  const LD q = q_active;
  return static_cast<double>(xlogx(q) + xlogx(1.0L - q) - q * log_on - (1.0L - q) * log_off);
}

GridMin1 support_grid_min(double pi_prior, const GammaParams& q_rho, const HierPrior& prior,
                          std::size_t points) {
  if (points < 2) throw std::invalid_argument("support_grid_min: need at least 2 points");
  GridMin1 best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < points; ++i) {
    const double q = static_cast<double>(i) / static_cast<double>(points - 1);
    const double v = support_objective(q, pi_prior, q_rho, prior);
    if (v < best.value) best = {q, v};
  }
  return best;
}

double precision_objective(const GammaParams& q_rho, double q_active, double mu, double sigma,
                           const HierPrior& prior) {
  const LD shape = q_rho.shape;
  const LD rate = q_rho.rate;
  const LD mean = shape / rate;
  const LD mean_log = static_cast<LD>(digamma_fd(q_rho.shape)) - std::log(rate);
  // E_q ln q(rho)
  const LD neg_entropy = shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0L) * mean_log - shape;
  // E ln N(w; 0, 1/rho) without the -0.5 ln 2 pi constant.
  const LD second = static_cast<LD>(mu) * mu + static_cast<LD>(sigma) * sigma;
  const LD log_lik = 0.5L * mean_log - 0.5L * mean * second;
  const LD log_prior = q_active * expected_log_gamma(prior.a, prior.b, q_rho.shape, q_rho.rate) +
                       (1.0L - q_active) *
                           expected_log_gamma(prior.a_bar, prior.b_bar, q_rho.shape, q_rho.rate);
  return static_cast<double>(neg_entropy - log_lik - log_prior);
}

GammaParams precision_minimizer(double q_active, double mu, double sigma, const HierPrior& prior) {
  const double shape = q_active * prior.a + (1.0 - q_active) * prior.a_bar + 0.5;
  const double rate = q_active * prior.b + (1.0 - q_active) * prior.b_bar + 0.5 * (mu * mu + sigma * sigma);
  return {shape, rate};
}

GridMin2 precision_grid_min(const GammaParams& center, double span, std::size_t points,
                            double q_active, double mu, double sigma, const HierPrior& prior) {
  if (points < 2 || !(span > 1.0)) throw std::invalid_argument("precision_grid_min: bad grid");
  GridMin2 best{0.0, 0.0, std::numeric_limits<double>::infinity()};
  const double lo = -std::log(span);
  const double step = 2.0 * std::log(span) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double shape = center.shape * std::exp(lo + step * static_cast<double>(i));
    for (std::size_t j = 0; j < points; ++j) {
      const double rate = center.rate * std::exp(lo + step * static_cast<double>(j));
      const double v = precision_objective({shape, rate}, q_active, mu, sigma, prior);
      if (v < best.value) best = {shape, rate, v};
    }
  }
  return best;
}

std::vector<std::vector<long double>> plain_logits(const NetArch& arch, std::span<const double> weights,
                                                   std::span<const double> bias, const Dataset& x) {
  std::vector<std::vector<LD>> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back(forward_row(arch, weights, bias, x, i, nullptr));
  return out;
}

namespace {

LD loss_with(const VariationalNetState& st, std::span<const double> mu, std::span<const double> bias,
             double sigma, const Dataset& batch, const DataScale& scale, std::span<const double> eps,
             std::vector<signed char>* signs) {
  LD kl = 0.0L;
  for (std::size_t n = 0; n < mu.size(); ++n) {
    const LD s = st.prior_std[n];
    kl += std::log(s / sigma) + (static_cast<LD>(sigma) * sigma + static_cast<LD>(mu[n]) * mu[n]) / (2.0L * s * s) -
          0.5L;
  }
  LD bp = 0.0L;
  for (double b : bias) bp += 0.5L * b * b;
  if (batch.empty()) return kl + bp;
  std::vector<double> w(mu.size());
  for (std::size_t n = 0; n < w.size(); ++n) w[n] = mu[n] + sigma * eps[n];
  const LD factor = static_cast<LD>(scale.local_records) / scale.client_weight / batch.size();
  return kl + bp + data_term(st.arch, w, bias, batch, factor, signs);
}

}  // namespace

long double plain_loss(const VariationalNetState& state, const Dataset& batch, const DataScale& scale,
                       std::span<const double> eps) {
  return loss_with(state, state.mu, state.bias, state.sigma, batch, scale, eps, nullptr);
}

GradCheckReport check_gradients(const VariationalNetState& state, const Dataset& batch,
                                const DataScale& scale, std::span<const double> eps,
                                const Gradients& analytic, double h, double abs_floor) {
  GradCheckReport rep;
  std::vector<double> mu = state.mu;
  std::vector<double> bias = state.bias;

  auto evaluate = [&](double sigma, std::vector<signed char>* signs) {
    return loss_with(state, mu, bias, sigma, batch, scale, eps, signs);
  };
  auto record = [&](double a, LD plus, LD minus, const std::vector<signed char>& sp,
                    const std::vector<signed char>& sm, const std::vector<signed char>& s0,
                    const std::string& name) {
    if (sp != s0 || sm != s0) {
      ++rep.skipped_at_kinks;
      return;
    }
    const double fd = static_cast<double>((plus - minus) / (2.0L * h));
    const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), abs_floor});
    ++rep.checked;
    if (err > rep.max_rel_error || rep.worst.empty()) {
      rep.max_rel_error = std::max(rep.max_rel_error, err);
      if (err >= rep.max_rel_error) rep.worst = name;
    }
  };

  std::vector<signed char> s0;
  evaluate(state.sigma, &s0);
  std::vector<signed char> sp;
  std::vector<signed char> sm;
  for (std::size_t n = 0; n < mu.size(); ++n) {
    const double keep = mu[n];
    sp.clear();
    sm.clear();
    mu[n] = keep + h;
    const LD plus = evaluate(state.sigma, &sp);
    mu[n] = keep - h;
    const LD minus = evaluate(state.sigma, &sm);
    mu[n] = keep;
    record(analytic.mu[n], plus, minus, sp, sm, s0, "mu[" + std::to_string(n) + "]");
  }
  for (std::size_t j = 0; j < bias.size(); ++j) {
    const double keep = bias[j];
    sp.clear();
    sm.clear();
    bias[j] = keep + h;
    const LD plus = evaluate(state.sigma, &sp);
    bias[j] = keep - h;
    const LD minus = evaluate(state.sigma, &sm);
    bias[j] = keep;
    record(analytic.bias[j], plus, minus, sp, sm, s0, "bias[" + std::to_string(j) + "]");
  }
  sp.clear();
  sm.clear();
  const LD plus = evaluate(state.sigma + h, &sp);
  const LD minus = evaluate(state.sigma - h, &sm);
  record(analytic.sigma, plus, minus, sp, sm, s0, "sigma");
  return rep;
}

NelbTerms plain_nelb(const ServerState& state, const Dataset& sample, double total_records,
                     std::span<const double> eps) {
  NelbTerms t;
  const LD sig = state.sigma_global;
  for (std::size_t l = 0; l < state.arch.num_layers(); ++l) {
    const HierPrior& p = state.priors[l];
    for (std::size_t n = state.arch.weight_offset(l); n < state.arch.weight_offset(l + 1); ++n) {
      const GammaParams& q = state.gamma_post[n];
      const LD mean = static_cast<LD>(q.shape) / q.rate;
      const LD mean_log = static_cast<LD>(digamma_fd(q.shape)) - std::log(static_cast<LD>(q.rate));
      const LD mu = state.mu_global[n];
      // E ln N(w; mu, sig^2) - E ln N(w; 0, 1/rho)
      t.gaussian += -0.5L - std::log(sig) - 0.5L * mean_log + 0.5L * mean * (mu * mu + sig * sig);
      const LD pt = state.pi_tilde[n];
      t.gamma += expected_log_gamma(q.shape, q.rate, q.shape, q.rate) -
                 pt * expected_log_gamma(p.a, p.b, q.shape, q.rate) -
                 (1.0L - pt) * expected_log_gamma(p.a_bar, p.b_bar, q.shape, q.rate);
      const LD pr = state.pi_prior[n];
      t.bernoulli += xlogx(pt) - (pt > 0.0L ? pt * std::log(pr) : 0.0L) + xlogx(1.0L - pt) -
                     (pt < 1.0L ? (1.0L - pt) * std::log(1.0L - pr) : 0.0L);
    }
  }
  if (!sample.empty() && total_records > 0.0) {
    std::vector<double> w(state.mu_global.size());
    for (std::size_t n = 0; n < w.size(); ++n) w[n] = state.mu_global[n] + state.sigma_global * eps[n];
    t.data = data_term(state.arch, w, state.bias_global, sample,
                       static_cast<LD>(total_records) / sample.size(), nullptr);
  }
  return t;
}

ClusterMask brute_force_clusters(const LayerShape& shape, std::span<const std::uint8_t> mask,
                                 std::size_t min_side) {
  if (mask.size() != shape.size()) throw std::invalid_argument("brute_force_clusters: mask size");
  const std::size_t R = shape.rows;
  const std::size_t C = shape.cols;
  std::vector<std::uint8_t> left(mask.begin(), mask.end());
  auto all_on = [&](std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
    for (std::size_t r = r0; r < r0 + h; ++r) {
      for (std::size_t c = c0; c < c0 + w; ++c) {
        if (!left[r * C + c]) return false;
      }
    }
    return true;
  };
  ClusterMask out;
  out.shape = shape;
  for (;;) {
    bool found = false;
    Rect best;
    for (std::size_t r0 = 0; r0 < R; ++r0) {
      for (std::size_t c0 = 0; c0 < C; ++c0) {
        for (std::size_t h = min_side + 1; r0 + h <= R; ++h) {
          for (std::size_t w = min_side + 1; c0 + w <= C; ++w) {
            if (!all_on(r0, c0, h, w)) continue;
            const Rect cand{static_cast<std::uint32_t>(r0), static_cast<std::uint32_t>(c0),
                            static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)};
            const bool better =
                !found || cand.area() > best.area() ||
                (cand.area() == best.area() &&
                 (cand.row < best.row ||
                  (cand.row == best.row && (cand.col < best.col ||
                                            (cand.col == best.col && cand.height > best.height)))));
            if (better) {
              best = cand;
              found = true;
            }
          }
        }
      }
    }
    if (!found) break;
    out.clusters.push_back(best);
    for (std::size_t r = best.row; r < best.row + best.height; ++r) {
      for (std::size_t c = best.col; c < best.col + best.width; ++c) left[r * C + c] = 0;
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) {
      if (left[r * C + c]) out.singletons.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)});
    }
  }
  return out;
}

std::vector<std::size_t> sorted_topk(std::span<const double> x, double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) throw std::invalid_argument("sorted_topk: k_fraction");
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(x[a]) > std::abs(x[b]); });
  const auto k = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(x.size()) - 1e-9));
  idx.resize(std::min(k, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double> brute_force_marginals(const LayerShape& shape, const HierPrior& prior,
                                          std::span<const double> unary_active) {
  const std::size_t n = shape.size();
  if (n > 20) throw std::invalid_argument("brute_force_marginals: more than 20 nodes");
  if (unary_active.size() != n) throw std::invalid_argument("brute_force_marginals: unary size");
  std::vector<LD> on(n, 0.0L);
  LD z = 0.0L;
  for (std::uint32_t cfg = 0; cfg < (1U << n); ++cfg) {
    auto s = [&](std::size_t r, std::size_t c) { return static_cast<int>((cfg >> (r * shape.cols + c)) & 1U); };
    LD p = s(0, 0) ? prior.init_active : 1.0L - prior.init_active;
    for (std::size_t r = 0; r < shape.rows; ++r) {
      for (std::size_t c = 0; c < shape.cols; ++c) {
        const LD u = unary_active[r * shape.cols + c];
        p *= s(r, c) ? u : 1.0L - u;
        if (c + 1 < shape.cols) p *= prior.row_transition.at(s(r, c), s(r, c + 1));
        if (r + 1 < shape.rows) p *= prior.col_transition.at(s(r, c), s(r + 1, c));
      }
    }
    z += p;
    for (std::size_t k = 0; k < n; ++k) {
      if ((cfg >> k) & 1U) on[k] += p;
    }
  }
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<double>(on[k] / z);
  return out;
}

std::vector<double> fixture_uniforms(std::uint64_t seed, std::size_t n, double lo, double hi) {
  std::vector<double> out(n);
  std::uint64_t x = seed;
  for (auto& u : out) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    u = lo + (hi - lo) * static_cast<double>(z >> 11) * 0x1.0p-53;
  }
  return out;
}

GradCase random_grad_case(const NetArch& arch, std::uint64_t seed, std::size_t batch_size) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GradCase c;
  c.state = VariationalNetState::zeros(arch, 0.05, 1.0);
  for (auto& m : c.state.mu) m = 0.2 * normal(g);
  for (auto& b : c.state.bias) b = 0.1 * normal(g);
  for (auto& s : c.state.prior_std) s = std::exp(0.5 * normal(g));
  c.state.sigma = 0.01 + 0.1 * std::uniform_real_distribution<double>(0.0, 1.0)(g);
  c.batch.num_classes = static_cast<int>(arch.num_classes());
  c.batch.features.resize(static_cast<Eigen::Index>(batch_size), static_cast<Eigen::Index>(arch.input_dim()));
  for (Eigen::Index i = 0; i < c.batch.features.size(); ++i) c.batch.features.data()[i] = normal(g);
  std::uniform_int_distribution<int> label(0, c.batch.num_classes - 1);
  for (std::size_t i = 0; i < batch_size; ++i) c.batch.labels.push_back(label(g));
  c.scale = {0.1, 500.0};
  c.eps.resize(arch.weight_count());
  for (auto& e : c.eps) e = normal(g);
  return c;
}

}  // namespace dturbo::oracle
