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
// Acceptance run: one PASS/FAIL line per criterion, diagnostics indented
// below it. Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dturbo/baselines.hpp"
#include "dturbo/codec.hpp"
#include "dturbo/fed_sim.hpp"
#include "dturbo/grid_mrf.hpp"
#include "dturbo/io/config.hpp"
#include "dturbo/io/data.hpp"
#include "dturbo/io/results.hpp"
#include "dturbo/oracles.hpp"
#include "dturbo/vbi_server.hpp"

namespace dturbo {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Tolerances and budgets.
constexpr double kGridLinf = 0.05;
constexpr double kChainLinf = 1e-10;
constexpr double kGridSeconds = 5.0;
constexpr double kSupportSlack = 1e-9;
constexpr double kPrecisionSlack = 1e-6;
constexpr double kUpdateSeconds = 30.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kConsistencyTol = 1e-9;
constexpr std::size_t kNelbWindow = 5;
constexpr std::size_t kMaxNelbViolations = 2;
constexpr double kMaxNelbIncrease = 0.01;
constexpr double kIouFloor = 0.6;
constexpr double kIouRegression = 0.05;
constexpr double kAccuracyMatch = 0.02;
constexpr double kAggregationTol = 1e-12;
constexpr SpmpOptions kTight{500, 0.5, 1e-14};

const fs::path kSource = DTURBO_SOURCE_DIR;

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void verdict(int id, bool ok, const std::string& what) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename... Args>
void note(const char* fmt, Args... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
}

std::vector<BernoulliMessage> messages(const std::vector<double>& p) {
  std::vector<BernoulliMessage> out;
  for (double v : p) out.push_back(BernoulliMessage::normalized(1.0 - v, v));
  return out;
}

HierPrior with_stay(double stay) {
  HierPrior p;
  p.row_transition = TransitionMatrix::from_stay(stay, stay);
  p.col_transition = p.row_transition;
  return p;
}

double linf_vs_exact(const LayerShape& shape, const HierPrior& prior, const std::vector<double>& unary,
                     const SpmpOptions& opts) {
  const auto r = run_spmp(build_grid(shape, prior, messages(unary)), opts);
  const auto exact = oracle::brute_force_marginals(shape, prior, unary);
  double worst = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    worst = std::max(worst, std::abs(r.marginals[i].p_active - exact[i]));
  }
  return worst;
}

nlohmann::json fixture(const std::string& name) {
  std::ifstream in(kSource / "tests" / "fixtures" / name);
  return nlohmann::json::parse(in);
}

// ---------------------------------------------------------------------------

void grid_inference() {
  const auto t0 = Clock::now();
  double grid_worst = 0.0;
  double sticky_worst = 0.0;
  int grids = 0;
  for (const auto& c : fixture("grid_3x3.json")) {
    const double stay = c["stay"].get<double>();
    const double e = linf_vs_exact({3, 3}, with_stay(stay), c["unary"].get<std::vector<double>>(), kTight);
    if (stay == 0.7) {
      grid_worst = std::max(grid_worst, e);
      ++grids;
    } else {
      sticky_worst = std::max(sticky_worst, e);
    }
  }
  double chain_worst = 0.0;
  int chains = 0;
  for (std::size_t n = 1; n <= 12; ++n) {
    for (double stay : {0.7, 0.95}) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto u = oracle::fixture_uniforms(1000 * n + seed, n, 0.02, 0.98);
        chain_worst = std::max(chain_worst, linf_vs_exact({1, n}, with_stay(stay), u, kTight));
        chain_worst = std::max(chain_worst, linf_vs_exact({n, 1}, with_stay(stay), u, kTight));
        chains += 2;
      }
    }
  }
  const double secs = seconds_since(t0);
  char buf[256];
  std::snprintf(buf, sizeof buf, "grid L_inf %.3g over %d 3x3 grids, chain L_inf %.3g over %d chains, %.2f s",
                grid_worst, grids, chain_worst, chains, secs);
  verdict(1, grids == 10 && grid_worst <= kGridLinf && chain_worst <= kChainLinf && secs < kGridSeconds, buf);
  note("informational: same 3x3 unaries with stay 0.95 give L_inf %.3g", sticky_worst);
}

// ---------------------------------------------------------------------------

void update_optimality() {
  const auto t0 = Clock::now();
  const HierPrior prior;
  std::mt19937_64 rng(20260);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  double support_gap = -1e300;
  double precision_gap = -1e300;
  double minimizer_gap = -1e300;
  int support_losses = 0;
  int precision_losses = 0;
  int minimizer_losses = 0;
  constexpr int kStates = 50;
  for (int s = 0; s < kStates; ++s) {
    const double pi = 0.01 + 0.98 * unit(rng);
    const GammaParams q{0.5 + 20.0 * unit(rng), std::exp(-4.0 + 6.0 * unit(rng))};
    const double cf = support_posterior(pi, q, prior);
    const auto gm = oracle::support_grid_min(pi, q, prior, 1001);
    const double g1 = oracle::support_objective(cf, pi, q, prior) - gm.value;
    support_gap = std::max(support_gap, g1);
    support_losses += g1 > kSupportSlack ? 1 : 0;

    const double pt = unit(rng);
    const double mu = 0.5 * normal(rng);
    const double sigma = 0.01 + 0.2 * unit(rng);
    const GammaParams upd = precision_posterior(pt, mu, sigma, prior);
    const auto pg = oracle::precision_grid_min(upd, 2.0, 200, pt, mu, sigma, prior);
    const double g2 = oracle::precision_objective(upd, pt, mu, sigma, prior) - pg.value;
    precision_gap = std::max(precision_gap, g2);
    precision_losses += g2 > kPrecisionSlack ? 1 : 0;

    const GammaParams opt = oracle::precision_minimizer(pt, mu, sigma, prior);
    const auto og = oracle::precision_grid_min(opt, 2.0, 200, pt, mu, sigma, prior);
    const double g3 = oracle::precision_objective(opt, pt, mu, sigma, prior) - og.value;
    minimizer_gap = std::max(minimizer_gap, g3);
    minimizer_losses += g3 > kPrecisionSlack ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "support update loses on %d/%d states (worst gap %.3g); precision update loses on %d/%d "
                "(worst gap %.3g); %.2f s",
                support_losses, kStates, support_gap, precision_losses, kStates, precision_gap, secs);
  verdict(2, support_losses == 0 && precision_losses == 0 && secs < kUpdateSeconds, buf);
  note("diagnostic: the exact minimizer (shape + 1/2, rate + (mu^2 + sigma^2)/2) loses on %d/%d (worst gap %.3g)",
       minimizer_losses, kStates, minimizer_gap);
}

// ---------------------------------------------------------------------------

void gradient_correctness() {
  const auto t0 = Clock::now();
  const auto cfg = io::load_config(kSource / "configs/default.json");
  const NetArch& arch = cfg.experiment.arch;
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  constexpr int kStates = 20;
  for (int s = 0; s < kStates; ++s) {
    const auto c = oracle::random_grad_case(arch, 7000 + static_cast<std::uint64_t>(s));
    const auto g = local_gradients(c.state, c.batch, c.scale, WeightNoise{c.eps});
    const auto rep = oracle::check_gradients(c.state, c.batch, c.scale, c.eps, g);
    if (rep.max_rel_error > worst) {
      worst = rep.max_rel_error;
      where = "state " + std::to_string(s) + " " + rep.worst;
    }
    checked += rep.checked;
    skipped += rep.skipped_at_kinks;
  }
  const double secs = seconds_since(t0);
  char buf[320];
  std::snprintf(buf, sizeof buf, "max relative error %.3g at %s over %d states, %.2f s", worst, where.c_str(),
                kStates, secs);
  verdict(3, worst <= kGradTol && secs < kGradSeconds, buf);
  note("%zu coordinates checked, %zu skipped where a ReLU switched inside the difference step", checked, skipped);
}

// ---------------------------------------------------------------------------

void turbo_consistency() {
  auto cfg = io::load_config(kSource / "configs/default.json");
  cfg.experiment.method = Method::kTurboVbi;
  cfg.experiment.fed.rounds = 10;
  const auto data = io::load_data(cfg);
  FedSimulation sim(cfg.experiment, data.train, data.test);
  double reported = 0.0;
  double recomputed = 0.0;
  for (int r = 0; r < 10; ++r) {
    const ServerState before = sim.server();
    const auto m = sim.run_round();
    reported = std::max(reported, m.turbo_consistency);
    // Rebuild q(s) from the downward message and an upward message computed
    // directly from q(rho) as it stood when the support update ran.
    const ServerState& after = sim.server();
    std::size_t layer = 0;
    std::size_t layer_end = before.arch.layers()[0].rows * before.arch.layers()[0].cols;
    for (std::size_t n = 0; n < after.pi_tilde.size(); ++n) {
      if (n == layer_end) {
        ++layer;
        layer_end += before.arch.layers()[layer].rows * before.arch.layers()[layer].cols;
      }
      const HierPrior* prior = &before.prior_of_layer(layer);
      const auto& q = before.gamma_post[n];
      const long double up1 = oracle::expected_log_gamma(prior->a, prior->b, q.shape, q.rate);
      const long double up0 = oracle::expected_log_gamma(prior->a_bar, prior->b_bar, q.shape, q.rate);
      const long double l1 = std::log(static_cast<long double>(before.downward[n].v1)) + up1;
      const long double l0 = std::log(static_cast<long double>(before.downward[n].v0)) + up0;
      const double q1 = static_cast<double>(1.0L / (1.0L + std::exp(l0 - l1)));
      recomputed = std::max(recomputed, std::abs(q1 - after.pi_tilde[n]));
    }
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "max |normalize(down * up) - q(s)| = %.3g (recomputed %.3g) over 10 rounds",
                reported, recomputed);
  verdict(4, reported <= kConsistencyTol && recomputed <= kConsistencyTol, buf);
}

// ---------------------------------------------------------------------------

struct PlantedRun {
  io::RunConfig cfg;
  io::LoadedData data;
  ResultsBundle result;
};

PlantedRun planted_run() {
  PlantedRun p;
  p.cfg = io::load_config(kSource / "configs/planted.json");
  p.data = io::load_data(p.cfg);
  p.result = run_experiment(p.cfg.experiment, p.data.train, p.data.test);
  return p;
}

void convergence(const PlantedRun& p) {
  std::vector<double> series;
  for (const auto& m : p.result.rounds) series.push_back(m.nelb.value_or(NAN));
  const auto bad = ConvergenceMonitor::increases(series, kNelbWindow);
  double worst = 0.0;
  for (const auto& v : bad) worst = std::max(worst, v.relative_increase);
  const bool setup = p.cfg.experiment.fed.rounds == 30 && p.cfg.experiment.fed.seed == 0;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu increases of the trailing-%zu NELB mean over %zu rounds, largest %.3g%%",
                bad.size(), kNelbWindow, series.size(), 100.0 * worst);
  verdict(5, setup && bad.size() <= kMaxNelbViolations && worst < kMaxNelbIncrease, buf);
  note("NELB round 1 %.6g, round %zu %.6g", series.front(), series.size(), series.back());
}

void structure_recovery(const PlantedRun& p) {
  const auto iou = io::planted_iou(p.result, p.data);
  const double got = *std::min_element(iou.begin(), iou.end());
  const double ref = fixture("frozen.json")["planted_iou_seed0"].get<double>();
  const auto& fed = p.cfg.experiment.fed;
  const bool setup = fed.rounds == 30 && fed.clients == 4 && fed.dirichlet_alpha == 0.5;
  char buf[256];
  std::snprintf(buf, sizeof buf, "mask IoU %.4f (floor %.2f, reference %.4f)", got, kIouFloor, ref);
  verdict(6, setup && got >= kIouFloor && got >= ref - kIouRegression, buf);
}

// ---------------------------------------------------------------------------

void communication() {
  auto cfg = io::load_config(kSource / "configs/default.json");
  const auto data = io::load_data(cfg);
  struct Row {
    Method m;
    double acc;
    std::uint64_t bits;
  };
  std::vector<Row> rows;
  for (Method m : {Method::kTurboVbi, Method::kTopk, Method::kQuant, Method::kFedAvg}) {
    cfg.experiment.method = m;
    const auto r = run_experiment(cfg.experiment, data.train, data.test);
    const auto& last = r.rounds.back();
    rows.push_back({m, last.accuracy, last.bits_up + last.bits_down});
  }
  const Row& turbo = rows[0];
  bool ok = true;
  for (std::size_t i = 1; i <= 2; ++i) {
    ok = ok && std::abs(turbo.acc - rows[i].acc) <= kAccuracyMatch && turbo.bits < rows[i].bits;
  }
  char buf[320];
  std::snprintf(buf, sizeof buf, "turbo %.4f acc / %.4g bits; topk %.4f / %.4g; quant %.4f / %.4g", turbo.acc,
                static_cast<double>(turbo.bits), rows[1].acc, static_cast<double>(rows[1].bits), rows[2].acc,
                static_cast<double>(rows[2].bits));
  verdict(7, ok, buf);
  note("fedavg reference: %.4f acc / %.4g bits", rows[3].acc, static_cast<double>(rows[3].bits));
}

// ---------------------------------------------------------------------------

void codec() {
  constexpr unsigned kBits = 16;
  int exact = 0;
  int dominant = 0;
  int structured = 0;
  std::mt19937_64 rng(88);
  for (std::uint64_t s = 0; s < 100; ++s) {
    const LayerShape shape{8 + rng() % 57, 8 + rng() % 57};
    const double density = 0.05 + 0.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto mask = random_cluster_mask(shape, density, kDefaultMinSide, 12, s);
    const auto cm = extract_clusters(shape, mask);
    std::vector<double> values(shape.rows * shape.cols);
    std::normal_distribution<double> normal(0.0, 0.3);
    for (auto& v : values) v = normal(rng);
    const auto enc = encode_layer(values, cm, kBits);
    const auto dec = decode_layer(enc.bytes, shape, kBits);
    if (dec.clusters.to_mask() == mask && dec.values == quantize_on_mask(values, cm, kBits)) ++exact;
    // Every mask here is a union of rectangles with sides > 3. Overlaps can
    // leave thin strips that go out as singletons at the same price either way.
    if (!cm.clusters.empty()) {
      ++structured;
      if (cluster_encoding_bits(cm, kBits) < singleton_encoding_bits(cm.active_count(), kBits)) ++dominant;
    }
  }
  ClusterMask canon;
  canon.shape = {4, 4};
  canon.clusters.push_back({0, 0, 4, 4});
  const auto c = cluster_encoding_bits(canon, kBits) - kRangeBits;
  const auto s = singleton_encoding_bits(16, kBits) - kRangeBits;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d/100 exact round trips; cluster < singleton on %d/%d rectangle masks; 4x4: %llu vs %llu",
                exact, dominant, structured, static_cast<unsigned long long>(c),
                static_cast<unsigned long long>(s));
  verdict(8, exact == 100 && structured > 0 && dominant == structured && c == 320 && s == 768, buf);
}

// ---------------------------------------------------------------------------

void determinism() {
  auto cfg = io::load_config(kSource / "configs/default.json");
  const auto data = io::load_data(cfg);
  cfg.experiment.threads = 1;
  const auto a = io::results_csv(run_experiment(cfg.experiment, data.train, data.test));
  cfg.experiment.threads = 4;
  const auto b = io::results_csv(run_experiment(cfg.experiment, data.train, data.test));
  verdict(9, a == b && !a.empty(),
          std::string("default experiment CSVs with 1 and 4 threads are ") + (a == b ? "identical" : "different") +
              " (" + std::to_string(a.size()) + " bytes)");
}

// ---------------------------------------------------------------------------

void aggregation() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  bool identity = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = trial < 20 ? 1 : 1 + rng() % 16;
    const std::size_t n = 1 + rng() % 300;
    std::vector<std::vector<double>> mu(T, std::vector<double>(n));
    std::vector<std::vector<double>> bias(T, std::vector<double>(3));
    std::vector<double> w(T);
    std::vector<double> sig(T);
    long double wsum = 0.0L;
    for (std::size_t t = 0; t < T; ++t) {
      for (auto& v : mu[t]) v = normal(rng) * std::exp(4.0 * normal(rng));
      for (auto& v : bias[t]) v = normal(rng);
      w[t] = 0.01 + unit(rng);
      sig[t] = 0.01 + unit(rng);
      wsum += w[t];
    }
    for (auto& x : w) x = static_cast<double>(x / wsum);
    std::vector<ClientUpload> up;
    for (std::size_t t = 0; t < T; ++t) up.push_back({mu[t], bias[t], sig[t], w[t]});
    const Aggregate agg = aggregate(up);
    long double total_w = 0.0L;
    for (double x : w) total_w += x;
    auto check = [&](double got, long double ref) {
      const double scale = std::max(1.0, static_cast<double>(std::fabs(ref)));
      worst = std::max(worst, std::abs(got - static_cast<double>(ref)) / scale);
    };
    for (std::size_t i = 0; i < n; ++i) {
      long double ref = 0.0L;
      for (std::size_t t = 0; t < T; ++t) ref += static_cast<long double>(w[t]) * mu[t][i];
      check(agg.mu[i], ref / total_w);
      if (T == 1) identity = identity && agg.mu[i] == mu[0][i];
    }
    for (std::size_t i = 0; i < 3; ++i) {
      long double ref = 0.0L;
      for (std::size_t t = 0; t < T; ++t) ref += static_cast<long double>(w[t]) * bias[t][i];
      check(agg.bias[i], ref / total_w);
    }
    long double sref = 0.0L;
    for (std::size_t t = 0; t < T; ++t) sref += static_cast<long double>(w[t]) * sig[t];
    check(agg.sigma, sref / total_w);
    if (T == 1) identity = identity && agg.sigma == sig[0];
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "worst scaled error %.3g over 200 random aggregations; T=1 identity %s", worst,
                identity ? "exact" : "broken");
  verdict(10, worst <= kAggregationTol && identity, buf);
}

}  // namespace
}  // namespace dturbo

int main() {
  using namespace dturbo;
  grid_inference();
  update_optimality();
  gradient_correctness();
  turbo_consistency();
  const auto planted = planted_run();
  convergence(planted);
  structure_recovery(planted);
  communication();
  codec();
  determinism();
  aggregation();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
