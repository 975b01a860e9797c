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
// Cluster-wise coding of a sparse weight matrix. Active cells are split into
// axis-aligned rectangles (both sides > min_side) plus leftover singletons.
// Cost model, in bits:
//   range      2 x 32           (float32 min and max, once per layer)
//   cluster    4 x 16 + h*w*B   (row, col, height, width, then values)
//   singleton  2 x 16 + B       (row, col, then value)
// The serialized stream additionally opens with two u32 counts (clusters,
// singletons); these framing bits are not part of the cost model.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dturbo/prior.hpp"

namespace dturbo {

struct Rect {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  std::size_t area() const { return static_cast<std::size_t>(height) * width; }
  bool operator==(const Rect&) const = default;
};

struct Cell {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  bool operator==(const Cell&) const = default;
};

struct ClusterMask {
  LayerShape shape;
  std::vector<Rect> clusters;
  std::vector<Cell> singletons;

  std::size_t active_count() const;
  /// Dense 0/1 mask, row-major.
  std::vector<std::uint8_t> to_mask() const;
};

inline constexpr unsigned kCoordBits = 16;
inline constexpr unsigned kRangeBits = 64;
inline constexpr unsigned kFramingBits = 64;
inline constexpr std::size_t kDefaultMinSide = 3;

/// Greedy decomposition: repeatedly take the largest all-active rectangle of
/// uncovered cells with both sides > min_side (ties: area desc, then row asc,
/// col asc, height desc). Leftover active cells become singletons in row-major
/// order. Coverage is checked before returning (std::logic_error on failure).
ClusterMask extract_clusters(const LayerShape& shape, std::span<const std::uint8_t> mask,
                             std::size_t min_side = kDefaultMinSide);

/// Throws std::logic_error unless clusters and singletons cover exactly the
/// active cells of `mask`, without overlap and within bounds.
void check_coverage(const ClusterMask& cm, std::span<const std::uint8_t> mask);

/// Uniform fixed-point grid with 2^bits - 1 steps over [lo, hi]. Both
/// endpoints are representable; the reconstruction error of a value inside the
/// range is at most step()/2.
class Quantizer {
 public:
  Quantizer(double lo, double hi, unsigned bits);

  std::uint64_t levels() const { return levels_; }  // largest code
  double step() const { return step_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  unsigned bits() const { return bits_; }

  std::uint64_t encode(double v) const;
  double decode(std::uint64_t code) const;
  double round_trip(double v) const { return decode(encode(v)); }

 private:
  double lo_;
  double hi_;
  unsigned bits_;
  std::uint64_t levels_;
  double step_;
};

/// Float32 range covering every value (rounded outward), as transmitted.
/// Empty input gives [0, 0].
std::pair<float, float> transmitted_range(std::span<const double> values);

struct EncodedLayer {
  LayerShape shape;
  unsigned bits_per_value = 16;
  std::uint64_t header_bits = 0;   // range plus coordinate fields
  std::uint64_t payload_bits = 0;  // quantized values
  std::uint64_t total_bits = 0;    // header + payload
  std::vector<std::uint8_t> bytes; // serialized stream, framing included
};

/// Cost-model size without serializing.
std::uint64_t cluster_encoding_bits(const ClusterMask& cm, unsigned bits_per_value);
/// Cost of sending the same active cells all as singletons.
std::uint64_t singleton_encoding_bits(std::size_t active_cells, unsigned bits_per_value);

/// Encodes the active cells of `values` (row-major, shape cm.shape). The range
/// is taken over the active cells only.
EncodedLayer encode_layer(std::span<const double> values, const ClusterMask& cm,
                          unsigned bits_per_value);

struct DecodedLayer {
  ClusterMask clusters;
  std::vector<double> values;  // dense, zero outside the active cells
};

/// Inverse of encode_layer. Throws std::invalid_argument on a malformed stream.
DecodedLayer decode_layer(std::span<const std::uint8_t> bytes, const LayerShape& shape,
                          unsigned bits_per_value);

/// What decode(encode(values)) must return: quantized active cells, zeros elsewhere.
std::vector<double> quantize_on_mask(std::span<const double> values, const ClusterMask& cm,
                                     unsigned bits_per_value);

/// Random mask made of rectangles with sides in [min_side + 1, max_side],
/// stopping once the active fraction reaches `density`.
std::vector<std::uint8_t> random_cluster_mask(const LayerShape& shape, double density,
                                              std::size_t min_side, std::size_t max_side,
                                              std::uint64_t seed);

struct MatmulTiming {
  double dense_seconds = 0.0;
  double clustered_seconds = 0.0;
  double max_abs_diff = 0.0;

  double speedup() const { return clustered_seconds > 0.0 ? dense_seconds / clustered_seconds : 0.0; }
};

/// Times X * W with W dense against the same product computed tile by tile
/// over the clusters plus singleton updates. W is random on the active cells
/// and zero elsewhere. Returns the best of `reps` timings for each path.
MatmulTiming masked_matmul_bench(const ClusterMask& cm, std::size_t batch_rows, int reps,
                                 std::uint64_t seed);

}  // namespace dturbo
