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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "commands.hpp"
#include "dturbo/grid_mrf.hpp"
#include "dturbo/oracles.hpp"
#include "dturbo/vbi_server.hpp"

namespace dturbo::cli {

using nlohmann::json;

namespace {

int emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
    return kOk;
  }
  std::ofstream f(out);
  if (!f) {
    std::cerr << "error: cannot write " << out << "\n";
    return kFailure;
  }
  f << j.dump(2) << "\n";
  std::cerr << "wrote " << out << "\n";
  return kOk;
}

}  // namespace

int cmd_enumerate_grid(const GridArgs& a) {
  const std::size_t n = a.rows * a.cols;
  if (n == 0 || n > kMaxEnumerationNodes) {
    std::cerr << "error: enumeration needs 1 to " << kMaxEnumerationNodes << " nodes, got " << n << "\n";
    return kBadInput;
  }
  if (!(a.stay >= 0.0 && a.stay <= 1.0)) {
    std::cerr << "error: --stay must lie in [0, 1]\n";
    return kBadInput;
  }
  HierPrior prior;
  prior.row_transition = TransitionMatrix::from_stay(a.stay, a.stay);
  prior.col_transition = prior.row_transition;
  const LayerShape shape{a.rows, a.cols};
  const auto unary = oracle::fixture_uniforms(a.seed, n, 0.05, 0.95);
  const auto exact = oracle::brute_force_marginals(shape, prior, unary);

  std::vector<BernoulliMessage> inputs;
  for (double u : unary) inputs.push_back(BernoulliMessage::normalized(1.0 - u, u));
  const auto spmp = run_spmp(build_grid(shape, prior, inputs), {500, 0.5, 1e-13});
  double linf = 0.0;
  std::vector<double> approx;
  for (std::size_t i = 0; i < n; ++i) {
    approx.push_back(spmp.marginals[i].p_active);
    linf = std::max(linf, std::abs(approx.back() - exact[i]));
  }
  const json j = {{"rows", a.rows},          {"cols", a.cols},   {"seed", a.seed},
                  {"stay", a.stay},          {"init_active", prior.init_active},
                  {"unary", unary},          {"marginals", exact},
                  {"spmp_marginals", approx}, {"spmp_linf", linf}};
  return emit(j, a.out);
}

int cmd_grad_check(const GradArgs& a) {
  NetArch arch;
  try {
    arch = NetArch::mlp(a.layers);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
  if (arch.weight_count() > 200000) {
    std::cerr << "error: " << arch.weight_count() << " weights is too many for a finite-difference sweep\n";
    return kBadInput;
  }
  json states = json::array();
  double worst = 0.0;
  for (int s = 0; s < a.states; ++s) {
    const auto c = oracle::random_grad_case(arch, a.seed + static_cast<std::uint64_t>(s));
    const auto g = local_gradients(c.state, c.batch, c.scale, WeightNoise{c.eps});
    const auto rep = oracle::check_gradients(c.state, c.batch, c.scale, c.eps, g);
    worst = std::max(worst, rep.max_rel_error);
    states.push_back({{"state", s},
                      {"max_rel_error", rep.max_rel_error},
                      {"worst", rep.worst},
                      {"checked", rep.checked},
                      {"skipped_at_kinks", rep.skipped_at_kinks}});
  }
  const json j = {{"layers", a.layers}, {"states", states}, {"max_rel_error", worst}, {"tol", a.tol},
                  {"pass", worst <= a.tol}};
  const int rc = emit(j, a.out);
  return rc != kOk ? rc : (worst <= a.tol ? kOk : kFailure);
}

int cmd_kl_grid_search(const KlArgs& a) {
  if (a.points < 2 || a.points > 1000001) {
    std::cerr << "error: --points must lie in [2, 1000001]\n";
    return kBadInput;
  }
  const HierPrior prior;
  json support = json::array();
  for (double pi : {0.05, 0.25, 0.5, 0.75, 0.95}) {
    for (const GammaParams q : {GammaParams{0.6, 0.1}, GammaParams{0.6, 1.0}, GammaParams{2.5, 0.05},
                                GammaParams{2.5, 0.5}, GammaParams{10.0, 0.1}}) {
      const double cf = support_posterior(pi, q, prior);
      const auto gm = oracle::support_grid_min(pi, q, prior, a.points);
      support.push_back({{"pi_prior", pi},
                         {"q_shape", q.shape},
                         {"q_rate", q.rate},
                         {"closed_form", cf},
                         {"grid_argmin", gm.arg},
                         {"objective_gap", oracle::support_objective(cf, pi, q, prior) - gm.value}});
    }
  }
  json precision = json::array();
  for (double pt : {0.0, 0.5, 1.0}) {
    for (double mu : {0.0, 0.3, 1.0}) {
      const double sigma = 0.05;
      const GammaParams cf = precision_posterior(pt, mu, sigma, prior);
      const GammaParams opt = oracle::precision_minimizer(pt, mu, sigma, prior);
      const auto gm = oracle::precision_grid_min(cf, 2.0, 200, pt, mu, sigma, prior);
      precision.push_back({{"q_active", pt},
                           {"mu", mu},
                           {"sigma", sigma},
                           {"update", {cf.shape, cf.rate}},
                           {"minimizer", {opt.shape, opt.rate}},
                           {"grid_best", {gm.shape, gm.rate}},
                           {"objective_gap", oracle::precision_objective(cf, pt, mu, sigma, prior) - gm.value}});
    }
  }
  const json j = {{"prior", {prior.a, prior.b, prior.a_bar, prior.b_bar}},
                  {"points", a.points},
                  {"support", support},
                  {"precision", precision}};
  return emit(j, a.out);
}

}  // namespace dturbo::cli
