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

#include <cmath>
#include <random>

#include "dturbo/baselines.hpp"
#include "dturbo/oracles.hpp"

namespace dturbo {
namespace {

TEST(Topk, Identity) {
  const std::vector<double> x{1.0, -2.0, 0.0, 3.5};
  EXPECT_EQ(topk_mask(x, 1.0), x);
}

TEST(Topk, SingleMaxMagnitude) {
  const std::vector<double> x{3.0, -5.0, 1.0};
  EXPECT_EQ(topk_mask(x, 1.0 / 3.0), (std::vector<double>{0.0, -5.0, 0.0}));
}

TEST(Topk, TiesGoToLowerIndex) {
  const std::vector<double> x{2.0, -2.0, 2.0, 1.0};
  EXPECT_EQ(topk_indices(x, 0.5), (std::vector<std::size_t>{0, 1}));
}

TEST(Topk, MatchesFullSortOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(1000 + seed * 37);
    for (auto& v : x) v = n(g);
    for (double k : {0.1, 0.01, 0.5}) {
      const auto idx = topk_indices(x, k);
      EXPECT_EQ(idx, oracle::sorted_topk(x, k));
      EXPECT_EQ(idx.size(), static_cast<std::size_t>(std::ceil(k * static_cast<double>(x.size()) - 1e-9)));
      const auto m = topk_mask(x, k);
      for (std::size_t i : idx) EXPECT_EQ(m[i], x[i]);
      EXPECT_EQ(static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](double v) { return v != 0.0; })),
                idx.size());
    }
  }
}

TEST(Topk, RejectsBadFraction) {
  const std::vector<double> x{1.0};
  EXPECT_THROW(topk_mask(x, 0.0), std::invalid_argument);
  EXPECT_THROW(topk_mask(x, 1.5), std::invalid_argument);
  EXPECT_THROW(topk_mask({}, 0.5), std::invalid_argument);
  EXPECT_EQ(topk_count(10, 0.01), 1u);
}

TEST(UniformQuantize, ConstantTensorExact) {
  const std::vector<double> x(7, -0.3125);
  EXPECT_EQ(uniform_quantize(x, 4), x);
}

TEST(UniformQuantize, OneBitEndpoints) {
  const std::vector<double> x{0.0, 1.0, 1.0, 0.0};
  EXPECT_EQ(uniform_quantize(x, 1), x);
}

TEST(UniformQuantize, SixteenBitErrorBound) {
  std::mt19937_64 g(16);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<double> x(5000);
  for (auto& v : x) v = n(g);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double bound = quantization_error_bound(*lo, *hi, 16);
  EXPECT_DOUBLE_EQ(bound, (*hi - *lo) / (2.0 * 65535.0));
  const auto q = uniform_quantize(x, 16);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(q[i] - x[i]), bound * (1.0 + 1e-9));
  EXPECT_EQ(q[static_cast<std::size_t>(lo - x.begin())], *lo);
  EXPECT_EQ(q[static_cast<std::size_t>(hi - x.begin())], *hi);
}

TEST(BitCounts, SparseAndDense) {
  EXPECT_EQ(dense_bits(100, 16), 100u * 16 + 64);
  EXPECT_EQ(sparse_upload_bits(10, 16), 10u * (kIndexBits + 16) + 64);
}

}  // namespace
}  // namespace dturbo
