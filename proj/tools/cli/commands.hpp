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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dturbo::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;     // runtime failure, or a check that did not pass
inline constexpr int kMissingFile = 2;
inline constexpr int kBadInput = 3;    // schema violation, invalid mask, oversize oracle

struct RunArgs {
  std::string config;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::string out;  // overrides DTURBO_OUTPUT_DIR and the config's output_dir
  bool quiet = false;
};
int cmd_run(const RunArgs& a);

struct GridArgs {
  std::size_t rows = 3;
  std::size_t cols = 3;
  std::uint64_t seed = 0;
  double stay = 0.7;
  std::string out;  // file; stdout when empty
};
int cmd_enumerate_grid(const GridArgs& a);

struct GradArgs {
  std::vector<std::size_t> layers{20, 64, 5};
  int states = 20;
  std::uint64_t seed = 0;
  double tol = 1e-4;
  std::string out;
};
int cmd_grad_check(const GradArgs& a);

struct KlArgs {
  std::size_t points = 1001;
  std::string out;
};
int cmd_kl_grid_search(const KlArgs& a);

struct BenchArgs {
  std::string mask;  // text file of 0/1 rows; random mask when empty
  double density = 0.186;
  std::size_t size = 512;
  std::size_t min_side = 4;
  std::size_t max_side = 32;
  std::size_t batch = 64;
  int reps = 20;
  std::uint64_t seed = 0;
  std::string out;  // directory receiving bench.csv
};
int cmd_bench(const BenchArgs& a);

/// --out, then DTURBO_OUTPUT_DIR, then `fallback`.
std::string output_dir(const std::string& flag, const std::string& fallback);

}  // namespace dturbo::cli
