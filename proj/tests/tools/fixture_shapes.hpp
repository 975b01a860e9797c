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
// Fixed inputs shared by the fixture freezer and the tests that read its
// output.

#pragma once

#include <cstdint>
#include <vector>

#include "dturbo/codec.hpp"

namespace dturbo::fixtures {

/// Two 6 x 6 blocks in a 32 x 32 layer.
inline std::vector<Rect> planted_clusters() { return {{4, 4, 6, 6}, {18, 20, 6, 6}}; }

inline constexpr LayerShape kLShape{12, 12};

/// Two L-shaped regions whose arms cross: each L is a 4-wide vertical bar
/// plus a 4-tall horizontal bar, and the second overlaps the first.
inline std::vector<std::uint8_t> two_l_mask() {
  std::vector<std::uint8_t> m(kLShape.size(), 0);
  auto fill = [&](std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
    for (std::size_t r = r0; r < r0 + h; ++r) {
      for (std::size_t c = c0; c < c0 + w; ++c) m[r * kLShape.cols + c] = 1;
    }
  };
  fill(0, 0, 8, 4);   // first L, vertical arm
  fill(4, 0, 4, 10);  // first L, horizontal arm
  fill(6, 6, 6, 4);   // second L, vertical arm
  fill(8, 2, 4, 10);  // second L, horizontal arm
  m[0 * kLShape.cols + 11] = 1;  // a stray cell
  return m;
}

}  // namespace dturbo::fixtures
