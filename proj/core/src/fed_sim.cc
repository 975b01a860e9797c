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

#include "dturbo/fed_sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "dturbo/baselines.hpp"

namespace dturbo {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagPartition = 0x5041525449ULL;
constexpr std::uint64_t kTagInit = 0x494e4954ULL;
constexpr std::uint64_t kTagNelb = 0x4e454c42ULL;
constexpr std::uint64_t kTagClient = 0x434c4e54ULL;

constexpr unsigned kScalarBits = 32;       // one float32
constexpr double kSaturationTol = 1e-6;    // q(s) counts as decided below this distance

struct Transmitted {
  std::vector<double> values;
  std::uint64_t bits = 0;
};

// Dense per-tensor quantized transfer.
Transmitted dense_transmit(std::span<const double> values, unsigned bits) {
  const auto [lo, hi] = transmitted_range(values);
  const Quantizer q(lo, hi, bits);
  Transmitted t;
  t.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) t.values[i] = q.round_trip(values[i]);
  t.bits = dense_bits(values.size(), bits);
  return t;
}

// Index/value transfer of the top-k entries.
Transmitted topk_transmit(std::span<const double> delta, double k_fraction, unsigned bits) {
  const auto idx = topk_indices(delta, k_fraction);
  std::vector<double> kept;
  kept.reserve(idx.size());
  for (std::size_t i : idx) kept.push_back(delta[i]);
  const auto [lo, hi] = transmitted_range(kept);
  const Quantizer q(lo, hi, bits);
  Transmitted t;
  t.values.assign(delta.size(), 0.0);
  for (std::size_t i : idx) t.values[i] = q.round_trip(delta[i]);
  t.bits = sparse_upload_bits(idx.size(), bits);
  return t;
}

double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

template <typename Fn>
void for_each_layer(const NetArch& arch, bool biases, Fn&& fn) {
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const std::size_t begin = biases ? arch.bias_offset(l) : arch.weight_offset(l);
    const std::size_t end = biases ? arch.bias_offset(l + 1) : arch.weight_offset(l + 1);
    fn(l, begin, end - begin);
  }
}

// Per-layer dense transfer of a flat vector.
Transmitted dense_by_layer(const NetArch& arch, bool biases, std::span<const double> flat,
                           unsigned bits) {
  Transmitted out;
  out.values.resize(flat.size());
  for_each_layer(arch, biases, [&](std::size_t, std::size_t begin, std::size_t n) {
    const auto t = dense_transmit(flat.subspan(begin, n), bits);
    std::copy(t.values.begin(), t.values.end(), out.values.begin() + static_cast<long>(begin));
    out.bits += t.bits;
  });
  return out;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::kTurboVbi: return "turbo_vbi";
    case Method::kTopk: return "topk_baseline";
    case Method::kQuant: return "quant_baseline";
    case Method::kFedAvg: return "fedavg";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kTurboVbi, Method::kTopk, Method::kQuant, Method::kFedAvg}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("method: unknown value '" + name +
                    "' (expected turbo_vbi, topk_baseline, quant_baseline or fedavg)");
}

void FedConfig::validate() const {
  if (clients == 0) throw ConfigError("fed.clients must be positive");
  if (rounds < 0) throw ConfigError("fed.rounds must be >= 0");
  if (local_steps < 0) throw ConfigError("fed.local_steps must be >= 0");
  if (!(dirichlet_alpha > 0.0)) throw ConfigError("fed.dirichlet_alpha must be positive");
  if (batch_size == 0) throw ConfigError("fed.batch_size must be positive");
  if (bits_per_value < 1 || bits_per_value > 32) throw ConfigError("fed.bits_per_value must lie in [1, 32]");
  if (!(mask_stable_tol >= 0.0 && mask_stable_tol <= 1.0)) {
    throw ConfigError("fed.mask_stable_tol must lie in [0, 1]");
  }
  if (mask_stable_rounds < 1) throw ConfigError("fed.mask_stable_rounds must be positive");
}

void ExperimentConfig::validate() const {
  fed.validate();
  validate_prior(prior);
  if (arch.num_layers() == 0) throw ConfigError("model.layers: empty architecture");
  if (!(schedule.eta0 >= 0.0)) throw ConfigError("optim.eta0 must be >= 0");
  if (!(schedule.tau > 0.0)) throw ConfigError("optim.tau must be positive");
  if (!(init.init_sigma > 0.0)) throw ConfigError("optim.init_sigma must be positive");
  if (!(init.init_scale >= 0.0)) throw ConfigError("optim.init_scale must be >= 0");
  if (!(init.init_support > 0.0 && init.init_support <= 1.0)) {
    throw ConfigError("optim.init_support must lie in (0, 1]");
  }
  if (spmp.max_iters < 0) throw ConfigError("spmp.max_iters must be >= 0");
  if (!(spmp.damping >= 0.0 && spmp.damping < 1.0)) throw ConfigError("spmp.damping must lie in [0, 1)");
  if (!(spmp.tol > 0.0)) throw ConfigError("spmp.tol must be positive");
  if (!(baselines.topk_fraction > 0.0 && baselines.topk_fraction <= 1.0)) {
    throw ConfigError("baselines.topk_fraction must lie in (0, 1]");
  }
  if (baselines.quant_bits < 1 || baselines.quant_bits > 32) {
    throw ConfigError("baselines.quant_bits must lie in [1, 32]");
  }
}

std::vector<ClientDataset> dirichlet_partition(const Dataset& data, std::size_t clients,
                                               double alpha, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("dirichlet_partition: empty dataset");
  if (clients == 0) throw std::invalid_argument("dirichlet_partition: need at least one client");
  if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet_partition: alpha must be positive");
  data.validate();

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<std::vector<std::size_t>> assign;
  for (int attempt = 0; attempt < 100; ++attempt) {
    assign.assign(clients, {});
    for (const auto& members : by_class) {
      if (members.empty()) continue;
      std::vector<std::size_t> shuffled = members;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::vector<double> share(clients);
      double total = 0.0;
      for (auto& s : share) total += (s = gamma(rng));
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t t = 0; t < clients; ++t) {
        cum += share[t] / total;
        std::size_t end = t + 1 == clients
                              ? shuffled.size()
                              : static_cast<std::size_t>(std::llround(cum * static_cast<double>(shuffled.size())));
        end = std::clamp(end, start, shuffled.size());
        assign[t].insert(assign[t].end(), shuffled.begin() + static_cast<long>(start),
                         shuffled.begin() + static_cast<long>(end));
        start = end;
      }
    }
    if (std::all_of(assign.begin(), assign.end(), [](const auto& a) { return !a.empty(); })) {
      std::vector<ClientDataset> out(clients);
      for (std::size_t t = 0; t < clients; ++t) {
        std::sort(assign[t].begin(), assign[t].end());
        out[t].indices = std::move(assign[t]);
        out[t].data = data.subset(out[t].indices);
        out[t].weight = static_cast<double>(out[t].indices.size()) / static_cast<double>(data.size());
      }
      return out;
    }
  }
  throw std::runtime_error("dirichlet_partition: could not give every one of " +
                           std::to_string(clients) + " clients a record in 100 draws");
}

std::uint64_t RoundComm::up_total() const {
  return std::accumulate(up.begin(), up.end(), std::uint64_t{0});
}

void CommLedger::record(RoundComm round) { rounds_.push_back(std::move(round)); }

std::uint64_t CommLedger::cumulative_up(std::size_t through_round) const {
  std::uint64_t s = 0;
  for (std::size_t r = 0; r < std::min(through_round, rounds_.size()); ++r) s += rounds_[r].up_total();
  return s;
}

std::uint64_t CommLedger::cumulative_down(std::size_t through_round) const {
  std::uint64_t s = 0;
  for (std::size_t r = 0; r < std::min(through_round, rounds_.size()); ++r) s += rounds_[r].down_total();
  return s;
}

std::vector<double> ConvergenceMonitor::trailing_average(const std::vector<double>& xs,
                                                         std::size_t window) {
  std::vector<double> out;
  if (window == 0 || xs.size() < window) return out;
  for (std::size_t i = window; i <= xs.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = i - window; j < i; ++j) s += xs[j];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

std::vector<ConvergenceMonitor::Violation> ConvergenceMonitor::increases(const std::vector<double>& xs,
                                                                         std::size_t window) {
  const auto avg = trailing_average(xs, window);
  std::vector<Violation> out;
  for (std::size_t i = 1; i < avg.size(); ++i) {
    if (avg[i] > avg[i - 1]) {
      out.push_back({i, (avg[i] - avg[i - 1]) / std::max(std::abs(avg[i - 1]), 1e-300)});
    }
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<std::vector<std::uint8_t>> layer_masks(const NetArch& arch,
                                                   std::span<const double> pi_tilde) {
  std::vector<std::vector<std::uint8_t>> out;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const auto slice = pi_tilde.subspan(arch.weight_offset(l), arch.layers()[l].size());
    out.push_back(active_mask(slice));
  }
  return out;
}

FedSimulation::FedSimulation(const ExperimentConfig& config, const Dataset& train,
                             const Dataset& test)
    : config_(config), train_(train), test_(test), ledger_(method_name(config.method)) {
  config_.validate();
  train_.validate();
  test_.validate();
  const NetArch& arch = config_.arch;
  if (train_.dim() != arch.input_dim() || (!test_.empty() && test_.dim() != arch.input_dim())) {
    throw ConfigError("model.layers: input width " + std::to_string(arch.input_dim()) +
                      " does not match the dataset's " + std::to_string(train_.dim()) + " features");
  }
  if (train_.num_classes > static_cast<int>(arch.num_classes())) {
    throw ConfigError("model.layers: output width " + std::to_string(arch.num_classes()) +
                      " is smaller than the " + std::to_string(train_.num_classes) + " classes");
  }
  const std::uint64_t seed = config_.fed.seed;
  clients_ = dirichlet_partition(train_, config_.fed.clients, config_.fed.dirichlet_alpha,
                                 derive_seed(seed, kTagPartition));

  // Fixed evaluation subset and noise for the objective.
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, kTagNelb, 1));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(order.size(), config_.nelb_sample));
  std::sort(order.begin(), order.end());
  nelb_sample_ = train_.subset(order);
  nelb_seed_ = derive_seed(seed, kTagNelb, 2);

  ServerInit init = config_.init;
  init.seed = derive_seed(seed, kTagInit);
  server_ = init_server(arch, config_.prior, init);

  const unsigned bits = config_.fed.bits_per_value;
  if (config_.method == Method::kTurboVbi) {
    server_.sigma_global = as_float(server_.sigma_global);
    prev_mask_ = active_mask(server_.pi_tilde);
    build_turbo_broadcast(layer_masks(arch, server_.pi_tilde));
  } else {
    auto mu = dense_by_layer(arch, false, server_.mu_global, bits);
    auto bias = dense_by_layer(arch, true, server_.bias_global, bits);
    server_.mu_global = mu.values;
    server_.bias_global = bias.values;
    broadcast_.mu = std::move(mu.values);
    broadcast_.bias = std::move(bias.values);
    broadcast_.bits = mu.bits + bias.bits;
  }
}

// Encodes the current global means for download and replaces them with what
// the clients will decode, then refreshes q(rho) and the prior-std payload.
void FedSimulation::build_turbo_broadcast(const std::vector<std::vector<std::uint8_t>>& masks) {
  const NetArch& arch = config_.arch;
  const unsigned bits = config_.fed.bits_per_value;
  Broadcast bc;
  bc.compressed = latched_;
  bc.mu.assign(server_.mu_global.size(), 0.0);
  if (latched_) {
    for_each_layer(arch, false, [&](std::size_t l, std::size_t begin, std::size_t n) {
      ClusterMask cm = extract_clusters(arch.layers()[l], masks[l], config_.fed.min_cluster);
      const auto slice = std::span<const double>(server_.mu_global).subspan(begin, n);
      const EncodedLayer enc = encode_layer(slice, cm, bits);
      const DecodedLayer dec = decode_layer(enc.bytes, cm.shape, bits);
      std::copy(dec.values.begin(), dec.values.end(), bc.mu.begin() + static_cast<long>(begin));
      bc.bits += enc.total_bits;
      bc.clusters.push_back(std::move(cm));
    });
  } else {
    auto t = dense_by_layer(arch, false, server_.mu_global, bits);
    bc.mu = std::move(t.values);
    bc.bits += t.bits;
  }
  auto bias = dense_by_layer(arch, true, server_.bias_global, bits);
  bc.bias = std::move(bias.values);
  bc.bits += bias.bits;
  bc.sigma = server_.sigma_global;
  bc.bits += kScalarBits;

  server_.mu_global = bc.mu;
  server_.bias_global = bc.bias;
  server_.gamma_post = update_precision_posterior(server_);

  // The prior std follows from (mu, sigma, mask) once every q(s) is decided,
  // so only the four prior numbers per layer need to travel.
  const bool saturated = std::all_of(server_.pi_tilde.begin(), server_.pi_tilde.end(), [](double p) {
    return std::min(p, 1.0 - p) < kSaturationTol;
  });
  if (saturated) {
    bc.prior_std.resize(server_.mu_global.size());
    for_each_layer(arch, false, [&](std::size_t l, std::size_t begin, std::size_t n) {
      const HierPrior& p = server_.priors[l];
      for (std::size_t i = 0; i < n; ++i) {
        const double hard = masks[l][i] ? 1.0 : 0.0;
        const GammaParams g = precision_posterior(hard, bc.mu[begin + i], bc.sigma, p);
        bc.prior_std[begin + i] = std::sqrt(g.rate / g.shape);
      }
      bc.bits += 4 * kScalarBits;
    });
  } else if (latched_) {
    // Pruned weights are neither broadcast nor uploaded, so their prior std
    // only shapes discarded client updates. Clients fill it from the inactive
    // prior at mu = 0; the kept cells travel cluster-coded.
    const std::vector<double> exact = prior_std(server_);
    bc.prior_std.resize(exact.size());
    for_each_layer(arch, false, [&](std::size_t l, std::size_t begin, std::size_t n) {
      const ClusterMask& cm = bc.clusters[l];
      const EncodedLayer enc = encode_layer(std::span<const double>(exact).subspan(begin, n), cm, bits);
      const DecodedLayer dec = decode_layer(enc.bytes, cm.shape, bits);
      const GammaParams off = precision_posterior(0.0, 0.0, bc.sigma, server_.priors[l]);
      const double fill = std::sqrt(off.rate / off.shape);
      for (std::size_t i = 0; i < n; ++i) bc.prior_std[begin + i] = masks[l][i] ? dec.values[i] : fill;
      bc.bits += enc.total_bits;
    });
  } else {
    auto t = dense_by_layer(arch, false, prior_std(server_), bits);
    bc.prior_std = std::move(t.values);
    bc.bits += t.bits;
  }
  broadcast_ = std::move(bc);
}

FedSimulation::Upload FedSimulation::train_client(std::size_t t) const {
  const NetArch& arch = config_.arch;
  const ClientDataset& cd = clients_[t];
  const bool turbo = config_.method == Method::kTurboVbi;
  const unsigned bits = config_.fed.bits_per_value;

  VariationalNetState st;
  st.arch = arch;
  st.mu = broadcast_.mu;
  st.bias = broadcast_.bias;
  st.prior_std = turbo ? broadcast_.prior_std : std::vector<double>(broadcast_.mu.size(), 1.0);
  st.sigma = turbo ? broadcast_.sigma : 1.0;

  LocalSgdOptions opt;
  opt.steps = config_.fed.local_steps;
  opt.batch_size = config_.fed.batch_size;
  opt.step_offset = static_cast<long>(round_) * config_.fed.local_steps;
  opt.seed = derive_seed(config_.fed.seed, kTagClient, static_cast<std::uint64_t>(round_), t);
  opt.variational = turbo;
  const DataScale scale{cd.weight, static_cast<double>(cd.data.size())};
  st = local_sgd(std::move(st), cd.data, scale, config_.schedule, opt);

  Upload up;
  up.mu.assign(st.mu.size(), 0.0);
  const auto mu_span = std::span<const double>(st.mu);
  switch (config_.method) {
    case Method::kTurboVbi:
      if (broadcast_.compressed) {
        for_each_layer(arch, false, [&](std::size_t l, std::size_t begin, std::size_t n) {
          const ClusterMask& cm = broadcast_.clusters[l];
          const EncodedLayer enc = encode_layer(mu_span.subspan(begin, n), cm, bits);
          const DecodedLayer dec = decode_layer(enc.bytes, cm.shape, bits);
          std::copy(dec.values.begin(), dec.values.end(), up.mu.begin() + static_cast<long>(begin));
          up.bits += enc.total_bits;
        });
      } else {
        auto tr = dense_by_layer(arch, false, mu_span, bits);
        up.mu = std::move(tr.values);
        up.bits += tr.bits;
      }
      up.sigma = as_float(st.sigma);
      up.bits += kScalarBits;
      break;
    case Method::kFedAvg: {
      auto tr = dense_by_layer(arch, false, mu_span, bits);
      up.mu = std::move(tr.values);
      up.bits += tr.bits;
      break;
    }
    case Method::kTopk:
    case Method::kQuant: {
      std::vector<double> delta(st.mu.size());
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = st.mu[i] - broadcast_.mu[i];
      for_each_layer(arch, false, [&](std::size_t, std::size_t begin, std::size_t n) {
        const auto slice = std::span<const double>(delta).subspan(begin, n);
        const Transmitted tr = config_.method == Method::kTopk
                                   ? topk_transmit(slice, config_.baselines.topk_fraction, bits)
                                   : dense_transmit(slice, config_.baselines.quant_bits);
        for (std::size_t i = 0; i < n; ++i) up.mu[begin + i] = broadcast_.mu[begin + i] + tr.values[i];
        up.bits += tr.bits;
      });
      break;
    }
  }
  auto bias = dense_by_layer(arch, true, st.bias, bits);
  up.bias = std::move(bias.values);
  up.bits += bias.bits;
  if (!turbo) up.sigma = 1.0;
  return up;
}

void FedSimulation::server_phase_baseline(const Aggregate& agg) {
  const unsigned bits = config_.fed.bits_per_value;
  auto mu = dense_by_layer(config_.arch, false, agg.mu, bits);
  auto bias = dense_by_layer(config_.arch, true, agg.bias, bits);
  server_.mu_global = mu.values;
  server_.bias_global = bias.values;
  Broadcast bc;
  bc.mu = std::move(mu.values);
  bc.bias = std::move(bias.values);
  bc.bits = mu.bits + bias.bits;
  broadcast_ = std::move(bc);
}

void FedSimulation::server_phase_turbo(const Aggregate& agg, RoundMetrics* m) {
  server_.mu_global = agg.mu;
  server_.bias_global = agg.bias;
  server_.sigma_global = as_float(agg.sigma);

  const std::vector<double> old_pi = server_.pi_tilde;
  server_.pi_tilde = update_support_posterior(server_);
  for (std::size_t n = 0; n < old_pi.size(); ++n) {
    m->max_pi_change = std::max(m->max_pi_change, std::abs(server_.pi_tilde[n] - old_pi[n]));
  }

  const auto mask = active_mask(server_.pi_tilde);
  std::size_t flips = 0;
  for (std::size_t n = 0; n < mask.size(); ++n) flips += mask[n] != prev_mask_[n] ? 1 : 0;
  const double flip_fraction = mask.empty() ? 0.0 : static_cast<double>(flips) / static_cast<double>(mask.size());
  const bool mixed = std::any_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v == 0; }) &&
                     std::any_of(mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; });
  stable_rounds_ = mixed && flip_fraction <= config_.fed.mask_stable_tol ? stable_rounds_ + 1 : 0;
  if (stable_rounds_ >= config_.fed.mask_stable_rounds) latched_ = true;
  prev_mask_ = mask;
  m->mask_flip_fraction = flip_fraction;

  // q(rho) is refreshed inside, from the means exactly as broadcast.
  build_turbo_broadcast(layer_masks(config_.arch, server_.pi_tilde));

  m->nelb = nelb(server_, nelb_sample_, static_cast<double>(train_.size()), nelb_seed_).total();

  const auto upward = compute_upward_messages(server_.pi_tilde, server_.downward);
  for (std::size_t n = 0; n < upward.size(); ++n) {
    const double a0 = server_.downward[n].v0 * upward[n].v0;
    const double a1 = server_.downward[n].v1 * upward[n].v1;
    const double recon = a1 / (a0 + a1);
    m->turbo_consistency = std::max(m->turbo_consistency, std::abs(recon - server_.pi_tilde[n]));
  }
  GridPassStats stats;
  server_.downward = run_support_prior(server_, upward, config_.spmp, &stats);
  server_.pi_prior = refresh_support_prior(server_.downward);
  m->spmp_iters = stats.max_iters_used;
  m->spmp_converged = stats.all_converged;
}

RoundMetrics FedSimulation::run_round() {
  const std::size_t T = clients_.size();
  RoundComm comm;
  comm.down_each = broadcast_.bits;
  const bool compressed_now = broadcast_.compressed;

  std::vector<Upload> uploads(T);
  parallel_for(T, config_.threads, [&](std::size_t t) { uploads[t] = train_client(t); });

  std::vector<ClientUpload> views;
  views.reserve(T);
  double sigma_mean = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    views.push_back({uploads[t].mu, uploads[t].bias, uploads[t].sigma, clients_[t].weight});
    comm.up.push_back(uploads[t].bits);
    sigma_mean += clients_[t].weight * uploads[t].sigma;
  }
  const Aggregate agg = aggregate(views);

  for (int s = 0; s < config_.fed.local_steps; ++s) {
    const double eta = config_.schedule(static_cast<long>(round_) * config_.fed.local_steps + s);
    eta_sum_ += eta;
    eta_sq_sum_ += eta * eta;
  }

  RoundMetrics m;
  if (config_.method == Method::kTurboVbi) {
    server_phase_turbo(agg, &m);
  } else {
    server_phase_baseline(agg);
  }
  ledger_.record(std::move(comm));
  ++round_;

  const RoundMetrics ev = evaluate();
  m.round = round_;
  m.accuracy = ev.accuracy;
  m.sparsity = ev.sparsity;
  m.mu_norm_sq = ev.mu_norm_sq;
  m.bits_up = ledger_.cumulative_up(ledger_.rounds().size());
  m.bits_down = ledger_.cumulative_down(ledger_.rounds().size());
  m.compressed = compressed_now;
  m.client_sigma = sigma_mean;
  m.eta_sum = eta_sum_;
  m.eta_sq_sum = eta_sq_sum_;
  return m;
}

std::vector<double> FedSimulation::evaluation_weights() const {
  std::vector<double> w = server_.mu_global;
  if (config_.method == Method::kTurboVbi) {
    for (std::size_t n = 0; n < w.size(); ++n) {
      if (server_.pi_tilde[n] < 0.5) w[n] = 0.0;
    }
  }
  return w;
}

RoundMetrics FedSimulation::evaluate() const {
  RoundMetrics m;
  m.round = round_;
  const auto w = evaluation_weights();
  m.accuracy = accuracy(config_.arch, w, server_.bias_global, test_);
  const auto nonzero = static_cast<double>(std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; }));
  m.sparsity = w.empty() ? 0.0 : nonzero / static_cast<double>(w.size());
  for (double v : server_.mu_global) m.mu_norm_sq += v * v;
  return m;
}

ResultsBundle run_experiment(const ExperimentConfig& config, const Dataset& train,
                             const Dataset& test, const RoundCallback& on_round) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  FedSimulation sim(config, train, test);
  ResultsBundle out;
  out.method = config.method;
  out.initial = sim.evaluate();
  if (config.method == Method::kTurboVbi) {
    out.initial.nelb = nelb(sim.server(), train, static_cast<double>(train.size()),
                            derive_seed(config.fed.seed, kTagNelb, 2))
                           .total();
  }
  for (const auto& c : sim.clients()) out.client_sizes.push_back(c.data.size());
  for (int r = 0; r < config.fed.rounds; ++r) {
    RoundMetrics m = sim.run_round();
    if (config.timing) m.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (on_round) on_round(m);
    out.rounds.push_back(std::move(m));
  }
  out.ledger = sim.ledger();
  if (config.method == Method::kTurboVbi) out.final_server = sim.server();
  out.final_weights = sim.evaluation_weights();
  out.final_bias = sim.server().bias_global;
  out.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

}  // namespace dturbo
