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
// Micro benchmarks for the hot paths: clustered matmul, grid message passing,
// layer coding and one local training pass.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dturbo/bayes_nn.hpp"
#include "dturbo/codec.hpp"
#include "dturbo/grid_mrf.hpp"
#include "dturbo/synthetic.hpp"

namespace dturbo {
namespace {

void BM_MaskedMatmul(benchmark::State& st) {
  const LayerShape shape{static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(0))};
  const double density = static_cast<double>(st.range(1)) / 1000.0;
  const auto cm = extract_clusters(shape, random_cluster_mask(shape, density, kDefaultMinSide, 32, 1));
  for (auto _ : st) {
    const auto t = masked_matmul_bench(cm, 64, 1, 2);
    st.counters["speedup"] = t.speedup();
  }
}
BENCHMARK(BM_MaskedMatmul)->Args({256, 186})->Args({512, 186})->Args({512, 50})->Unit(benchmark::kMillisecond);

void BM_Spmp(benchmark::State& st) {
  const LayerShape shape{static_cast<std::size_t>(st.range(0)), static_cast<std::size_t>(st.range(0))};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<BernoulliMessage> in;
  for (std::size_t i = 0; i < shape.rows * shape.cols; ++i) {
    const double p = u(rng);
    in.push_back(BernoulliMessage::normalized(1.0 - p, p));
  }
  const auto grid = build_grid(shape, HierPrior{}, in);
  for (auto _ : st) benchmark::DoNotOptimize(run_spmp(grid));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(shape.rows * shape.cols));
}
BENCHMARK(BM_Spmp)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_EncodeDecode(benchmark::State& st) {
  const LayerShape shape{256, 256};
  const auto mask = random_cluster_mask(shape, 0.186, kDefaultMinSide, 32, 4);
  const auto cm = extract_clusters(shape, mask);
  std::vector<double> w(shape.rows * shape.cols);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& v : w) v = n(rng);
  for (auto _ : st) {
    const auto enc = encode_layer(w, cm, 16);
    benchmark::DoNotOptimize(decode_layer(enc.bytes, shape, 16));
  }
}
BENCHMARK(BM_EncodeDecode)->Unit(benchmark::kMicrosecond);

void BM_LocalGradients(benchmark::State& st) {
  const std::size_t widths[] = {20, 64, 5};
  const auto arch = NetArch::mlp(widths);
  auto state = VariationalNetState::zeros(arch, 0.05, 1.0);
  const auto data = iid_gaussian_classification(20, 5, 32, 0);
  for (auto _ : st) benchmark::DoNotOptimize(local_gradients(state, data, DataScale{0.1, 400}, std::uint64_t{1}));
}
BENCHMARK(BM_LocalGradients)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace dturbo

BENCHMARK_MAIN();
