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

#include "dturbo/codec.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace dturbo {

std::size_t ClusterMask::active_count() const {
  std::size_t n = singletons.size();
  for (const auto& r : clusters) n += r.area();
  return n;
}

std::vector<std::uint8_t> ClusterMask::to_mask() const {
  std::vector<std::uint8_t> m(shape.size(), 0);
  for (const auto& r : clusters) {
    for (std::uint32_t i = r.row; i < r.row + r.height; ++i) {
      for (std::uint32_t j = r.col; j < r.col + r.width; ++j) m[i * shape.cols + j] = 1;
    }
  }
  for (const auto& s : singletons) m[s.row * shape.cols + s.col] = 1;
  return m;
}

namespace {

// True if a should be taken before b.
bool rect_before(const Rect& a, const Rect& b) {
  if (a.area() != b.area()) return a.area() > b.area();
  if (a.row != b.row) return a.row < b.row;
  if (a.col != b.col) return a.col < b.col;
  return a.height > b.height;
}

// Best rectangle of set cells with both sides > min_side, via the per-row
// histogram and nearest-smaller-bar bounds. Every maximal rectangle appears
// as a candidate, so the winner is the global optimum under rect_before.
bool best_rectangle(const std::vector<std::uint8_t>& cells, std::size_t rows, std::size_t cols,
                    std::size_t min_side, Rect* out) {
  std::vector<std::size_t> h(cols, 0);
  std::vector<std::size_t> left(cols);
  std::vector<std::size_t> right(cols);
  std::vector<std::size_t> stack;
  stack.reserve(cols);
  bool found = false;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) h[c] = cells[r * cols + c] ? h[c] + 1 : 0;
    stack.clear();
    for (std::size_t c = 0; c < cols; ++c) {
      while (!stack.empty() && h[stack.back()] >= h[c]) stack.pop_back();
      left[c] = stack.empty() ? 0 : stack.back() + 1;
      stack.push_back(c);
    }
    stack.clear();
    for (std::size_t c = cols; c-- > 0;) {
      while (!stack.empty() && h[stack.back()] >= h[c]) stack.pop_back();
      right[c] = stack.empty() ? cols - 1 : stack.back() - 1;
      stack.push_back(c);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (h[c] <= min_side) continue;
      const std::size_t w = right[c] - left[c] + 1;
      if (w <= min_side) continue;
      const Rect cand{static_cast<std::uint32_t>(r + 1 - h[c]), static_cast<std::uint32_t>(left[c]),
                      static_cast<std::uint32_t>(h[c]), static_cast<std::uint32_t>(w)};
      if (!found || rect_before(cand, *out)) {
        *out = cand;
        found = true;
      }
    }
  }
  return found;
}

}  // namespace

ClusterMask extract_clusters(const LayerShape& shape, std::span<const std::uint8_t> mask,
                             std::size_t min_side) {
  if (mask.size() != shape.size()) {
    throw std::invalid_argument("extract_clusters: mask has " + std::to_string(mask.size()) +
                                " cells, shape needs " + std::to_string(shape.size()));
  }
  ClusterMask cm;
  cm.shape = shape;
  std::vector<std::uint8_t> remaining(mask.begin(), mask.end());
  for (auto& v : remaining) v = v ? 1 : 0;

  Rect rect;
  while (best_rectangle(remaining, shape.rows, shape.cols, min_side, &rect)) {
    cm.clusters.push_back(rect);
    for (std::uint32_t i = rect.row; i < rect.row + rect.height; ++i) {
      std::fill_n(remaining.begin() + static_cast<long>(i * shape.cols + rect.col), rect.width, 0);
    }
  }
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (remaining[i]) {
      cm.singletons.push_back({static_cast<std::uint32_t>(i / shape.cols),
                               static_cast<std::uint32_t>(i % shape.cols)});
    }
  }
  check_coverage(cm, mask);
  return cm;
}

void check_coverage(const ClusterMask& cm, std::span<const std::uint8_t> mask) {
  const LayerShape& s = cm.shape;
  if (mask.size() != s.size()) throw std::logic_error("coverage: mask size mismatch");
  std::vector<std::uint8_t> hit(s.size(), 0);
  const auto mark = [&](std::size_t r, std::size_t c) {
    if (r >= s.rows || c >= s.cols) throw std::logic_error("coverage: cell out of bounds");
    auto& h = hit[r * s.cols + c];
    if (h) throw std::logic_error("coverage: overlapping cells");
    h = 1;
  };
  for (const auto& r : cm.clusters) {
    for (std::size_t i = 0; i < r.height; ++i) {
      for (std::size_t j = 0; j < r.width; ++j) mark(r.row + i, r.col + j);
    }
  }
  for (const auto& c : cm.singletons) mark(c.row, c.col);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((mask[i] != 0) != (hit[i] != 0)) throw std::logic_error("coverage: active cells not matched");
  }
}

Quantizer::Quantizer(double lo, double hi, unsigned bits) : lo_(lo), hi_(hi), bits_(bits) {
  if (bits < 1 || bits > 32) throw std::invalid_argument("Quantizer: bits must lie in [1, 32]");
  if (!(hi >= lo)) throw std::invalid_argument("Quantizer: hi must be >= lo");
  levels_ = (std::uint64_t{1} << bits) - 1;
  step_ = hi > lo ? (hi - lo) / static_cast<double>(levels_) : 0.0;
}

std::uint64_t Quantizer::encode(double v) const {
  if (step_ == 0.0) return 0;
  const double t = std::round((v - lo_) / step_);
  if (!(t > 0.0)) return 0;
  if (t >= static_cast<double>(levels_)) return levels_;
  return static_cast<std::uint64_t>(t);
}

double Quantizer::decode(std::uint64_t code) const {
  if (code >= levels_) return step_ == 0.0 ? lo_ : hi_;
  return lo_ + static_cast<double>(code) * step_;
}

std::pair<float, float> transmitted_range(std::span<const double> values) {
  if (values.empty()) return {0.0f, 0.0f};
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  float lo = static_cast<float>(*mn);
  float hi = static_cast<float>(*mx);
  if (static_cast<double>(lo) > *mn) lo = std::nextafter(lo, -std::numeric_limits<float>::infinity());
  if (static_cast<double>(hi) < *mx) hi = std::nextafter(hi, std::numeric_limits<float>::infinity());
  return {lo, hi};
}

std::uint64_t cluster_encoding_bits(const ClusterMask& cm, unsigned bits_per_value) {
  std::uint64_t bits = kRangeBits;
  for (const auto& r : cm.clusters) bits += 4 * kCoordBits + r.area() * bits_per_value;
  bits += cm.singletons.size() * (2 * kCoordBits + bits_per_value);
  return bits;
}

std::uint64_t singleton_encoding_bits(std::size_t active_cells, unsigned bits_per_value) {
  return kRangeBits + active_cells * (2 * kCoordBits + bits_per_value);
}

namespace {

class BitWriter {
 public:
  void put(std::uint64_t value, unsigned nbits) {
    for (unsigned i = 0; i < nbits; ++i) {
      if (pos_ % 8 == 0) bytes_.push_back(0);
      if ((value >> i) & 1U) bytes_.back() |= static_cast<std::uint8_t>(1U << (pos_ % 8));
      ++pos_;
    }
  }
  std::uint64_t bit_count() const { return pos_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint64_t get(unsigned nbits) {
    if (pos_ + nbits > bytes_.size() * 8) throw std::invalid_argument("decode_layer: truncated stream");
    std::uint64_t v = 0;
    for (unsigned i = 0; i < nbits; ++i, ++pos_) {
      if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1U) v |= std::uint64_t{1} << i;
    }
    return v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

std::vector<double> active_values(std::span<const double> values, const ClusterMask& cm) {
  std::vector<double> out;
  out.reserve(cm.active_count());
  const std::size_t cols = cm.shape.cols;
  for (const auto& r : cm.clusters) {
    for (std::size_t i = r.row; i < r.row + r.height; ++i) {
      for (std::size_t j = r.col; j < r.col + r.width; ++j) out.push_back(values[i * cols + j]);
    }
  }
  for (const auto& s : cm.singletons) out.push_back(values[s.row * cols + s.col]);
  return out;
}

void check_coord(std::size_t v) {
  if (v >= (std::size_t{1} << kCoordBits)) {
    throw std::invalid_argument("encode_layer: coordinate exceeds the 16-bit field");
  }
}

}  // namespace

EncodedLayer encode_layer(std::span<const double> values, const ClusterMask& cm,
                          unsigned bits_per_value) {
  if (values.size() != cm.shape.size()) {
    throw std::invalid_argument("encode_layer: values do not match the mask shape");
  }
  const auto active = active_values(values, cm);
  const auto [lo, hi] = transmitted_range(active);
  const Quantizer q(lo, hi, bits_per_value);

  BitWriter out;
  out.put(cm.clusters.size(), 32);
  out.put(cm.singletons.size(), 32);
  out.put(std::bit_cast<std::uint32_t>(lo), 32);
  out.put(std::bit_cast<std::uint32_t>(hi), 32);
  std::uint64_t header = kRangeBits;
  std::uint64_t payload = 0;
  std::size_t k = 0;
  for (const auto& r : cm.clusters) {
    for (std::size_t f : {r.row, r.col, r.height, r.width}) {
      check_coord(f);
      out.put(f, kCoordBits);
    }
    header += 4 * kCoordBits;
    for (std::size_t i = 0; i < r.area(); ++i) out.put(q.encode(active[k++]), bits_per_value);
    payload += r.area() * bits_per_value;
  }
  for (const auto& s : cm.singletons) {
    check_coord(s.row);
    check_coord(s.col);
    out.put(s.row, kCoordBits);
    out.put(s.col, kCoordBits);
    header += 2 * kCoordBits;
    out.put(q.encode(active[k++]), bits_per_value);
    payload += bits_per_value;
  }

  EncodedLayer enc;
  enc.shape = cm.shape;
  enc.bits_per_value = bits_per_value;
  enc.header_bits = header;
  enc.payload_bits = payload;
  enc.total_bits = header + payload;
  if (out.bit_count() != enc.total_bits + kFramingBits) {
    throw std::logic_error("encode_layer: stream length disagrees with the cost model");
  }
  enc.bytes = out.take();
  return enc;
}

DecodedLayer decode_layer(std::span<const std::uint8_t> bytes, const LayerShape& shape,
                          unsigned bits_per_value) {
  BitReader in(bytes);
  DecodedLayer dec;
  dec.clusters.shape = shape;
  dec.values.assign(shape.size(), 0.0);
  const std::uint64_t nc = in.get(32);
  const std::uint64_t ns = in.get(32);
  const float lo = std::bit_cast<float>(static_cast<std::uint32_t>(in.get(32)));
  const float hi = std::bit_cast<float>(static_cast<std::uint32_t>(in.get(32)));
  const Quantizer q(lo, hi, bits_per_value);
  const auto in_bounds = [&](std::uint64_t r, std::uint64_t c) {
    if (r >= shape.rows || c >= shape.cols) throw std::invalid_argument("decode_layer: cell out of bounds");
  };
  for (std::uint64_t i = 0; i < nc; ++i) {
    Rect r;
    r.row = static_cast<std::uint32_t>(in.get(kCoordBits));
    r.col = static_cast<std::uint32_t>(in.get(kCoordBits));
    r.height = static_cast<std::uint32_t>(in.get(kCoordBits));
    r.width = static_cast<std::uint32_t>(in.get(kCoordBits));
    if (r.height == 0 || r.width == 0) throw std::invalid_argument("decode_layer: empty cluster");
    in_bounds(std::uint64_t{r.row} + r.height - 1, std::uint64_t{r.col} + r.width - 1);
    for (std::size_t a = r.row; a < r.row + r.height; ++a) {
      for (std::size_t b = r.col; b < r.col + r.width; ++b) {
        dec.values[a * shape.cols + b] = q.decode(in.get(bits_per_value));
      }
    }
    dec.clusters.clusters.push_back(r);
  }
  for (std::uint64_t i = 0; i < ns; ++i) {
    Cell c;
    c.row = static_cast<std::uint32_t>(in.get(kCoordBits));
    c.col = static_cast<std::uint32_t>(in.get(kCoordBits));
    in_bounds(c.row, c.col);
    dec.values[c.row * shape.cols + c.col] = q.decode(in.get(bits_per_value));
    dec.clusters.singletons.push_back(c);
  }
  return dec;
}

std::vector<double> quantize_on_mask(std::span<const double> values, const ClusterMask& cm,
                                     unsigned bits_per_value) {
  const auto [lo, hi] = transmitted_range(active_values(values, cm));
  const Quantizer q(lo, hi, bits_per_value);
  std::vector<double> out(values.size(), 0.0);
  const auto mask = cm.to_mask();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i]) out[i] = q.round_trip(values[i]);
  }
  return out;
}

std::vector<std::uint8_t> random_cluster_mask(const LayerShape& shape, double density,
                                              std::size_t min_side, std::size_t max_side,
                                              std::uint64_t seed) {
  std::vector<std::uint8_t> m(shape.size(), 0);
  const std::size_t lo_side = min_side + 1;
  if (density <= 0.0 || shape.rows < lo_side || shape.cols < lo_side) return m;
  max_side = std::max(max_side, lo_side);
  std::mt19937_64 rng(seed);
  std::size_t active = 0;
  const auto target = static_cast<std::size_t>(std::ceil(density * static_cast<double>(shape.size())));
  for (int attempt = 0; attempt < 100000 && active < target; ++attempt) {
    std::uniform_int_distribution<std::size_t> hd(lo_side, std::min(max_side, shape.rows));
    std::uniform_int_distribution<std::size_t> wd(lo_side, std::min(max_side, shape.cols));
    const std::size_t h = hd(rng);
    const std::size_t w = wd(rng);
    std::uniform_int_distribution<std::size_t> rd(0, shape.rows - h);
    std::uniform_int_distribution<std::size_t> cd(0, shape.cols - w);
    const std::size_t r0 = rd(rng);
    const std::size_t c0 = cd(rng);
    for (std::size_t i = r0; i < r0 + h; ++i) {
      for (std::size_t j = c0; j < c0 + w; ++j) {
        auto& cell = m[i * shape.cols + j];
        if (!cell) {
          cell = 1;
          ++active;
        }
      }
    }
  }
  return m;
}

MatmulTiming masked_matmul_bench(const ClusterMask& cm, std::size_t batch_rows, int reps,
                                 std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  const auto rows = static_cast<Eigen::Index>(cm.shape.rows);
  const auto cols = static_cast<Eigen::Index>(cm.shape.cols);
  const auto n = static_cast<Eigen::Index>(batch_rows);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& r : cm.clusters) {
    for (std::uint32_t i = 0; i < r.height; ++i) {
      for (std::uint32_t j = 0; j < r.width; ++j) w(r.row + i, r.col + j) = normal(rng);
    }
  }
  for (const auto& s : cm.singletons) w(s.row, s.col) = normal(rng);
  Eigen::MatrixXd x(n, rows);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = normal(rng);
  }

  Eigen::MatrixXd dense(n, cols);
  Eigen::MatrixXd tiled(n, cols);
  MatmulTiming t;
  t.dense_seconds = std::numeric_limits<double>::infinity();
  t.clustered_seconds = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < std::max(reps, 1); ++rep) {
    auto t0 = Clock::now();
    dense.noalias() = x * w;
    auto t1 = Clock::now();
    t.dense_seconds = std::min(t.dense_seconds, std::chrono::duration<double>(t1 - t0).count());

    t0 = Clock::now();
    tiled.setZero();
    for (const auto& r : cm.clusters) {
      tiled.middleCols(r.col, r.width).noalias() +=
          x.middleCols(r.row, r.height) * w.block(r.row, r.col, r.height, r.width);
    }
    for (const auto& s : cm.singletons) tiled.col(s.col) += x.col(s.row) * w(s.row, s.col);
    t1 = Clock::now();
    t.clustered_seconds = std::min(t.clustered_seconds, std::chrono::duration<double>(t1 - t0).count());
  }
  t.max_abs_diff = (dense - tiled).cwiseAbs().maxCoeff();
  if (n == 0 || cols == 0) t.max_abs_diff = 0.0;
  return t;
}

}  // namespace dturbo
