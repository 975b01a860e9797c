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

#include "dturbo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dturbo/codec.hpp"

namespace dturbo {

std::size_t topk_count(std::size_t n, double k_fraction) {
  if (!(k_fraction > 0.0 && k_fraction <= 1.0)) {
    throw std::invalid_argument("topk: k_fraction must lie in (0, 1]");
  }
  const auto k = static_cast<std::size_t>(std::ceil(k_fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, n == 0 ? 0 : 1, n);
}

std::vector<std::size_t> topk_indices(std::span<const double> delta, double k_fraction) {
  if (delta.empty()) throw std::invalid_argument("topk: empty input");
  const std::size_t k = topk_count(delta.size(), k_fraction);
  std::vector<std::size_t> idx(delta.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto before = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(delta[a]);
    const double mb = std::abs(delta[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + static_cast<long>(k - 1), idx.end(), before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double> topk_mask(std::span<const double> delta, double k_fraction) {
  std::vector<double> out(delta.size(), 0.0);
  for (std::size_t i : topk_indices(delta, k_fraction)) out[i] = delta[i];
  return out;
}

std::vector<double> uniform_quantize(std::span<const double> values, unsigned bits) {
  if (values.empty()) return {};
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const Quantizer q(*mn, *mx, bits);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.round_trip(values[i]);
  return out;
}

double quantization_error_bound(double lo, double hi, unsigned bits) {
  const double levels = std::ldexp(1.0, static_cast<int>(bits)) - 1.0;
  return (hi - lo) / (2.0 * levels);
}

std::uint64_t sparse_upload_bits(std::size_t count, unsigned value_bits) {
  return kRangeBits + static_cast<std::uint64_t>(count) * (kIndexBits + value_bits);
}

std::uint64_t dense_bits(std::size_t count, unsigned value_bits) {
  return kRangeBits + static_cast<std::uint64_t>(count) * value_bits;
}

}  // namespace dturbo
