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
// Element-wise comparators: top-k sparsified uploads, uniformly quantized
// uploads, and plain dense averaging. All of them download dense.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dturbo {

/// Number of entries top-k keeps out of n: ceil(k_fraction * n), at least 1.
std::size_t topk_count(std::size_t n, double k_fraction);

/// Indices of the kept entries in ascending order. Larger magnitude wins,
/// equal magnitudes go to the lower index. Throws std::invalid_argument when
/// k_fraction is outside (0, 1] or the input is empty.
std::vector<std::size_t> topk_indices(std::span<const double> delta, double k_fraction);

/// Copy of `delta` with everything but the top-k entries zeroed.
std::vector<double> topk_mask(std::span<const double> delta, double k_fraction);

/// Per-tensor min/max uniform quantization with 2^bits - 1 steps. Endpoints
/// are reproduced exactly; a constant tensor comes back unchanged.
std::vector<double> uniform_quantize(std::span<const double> values, unsigned bits);

/// Largest reconstruction error of uniform_quantize: (hi - lo) / (2 (2^bits - 1)).
double quantization_error_bound(double lo, double hi, unsigned bits);

inline constexpr unsigned kIndexBits = 32;

/// Bits for `count` index/value pairs plus the 2 x 32-bit value range.
std::uint64_t sparse_upload_bits(std::size_t count, unsigned value_bits);
/// Bits for `count` dense values plus the 2 x 32-bit value range.
std::uint64_t dense_bits(std::size_t count, unsigned value_bits);

}  // namespace dturbo
