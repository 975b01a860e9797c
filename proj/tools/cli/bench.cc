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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "commands.hpp"
#include "dturbo/codec.hpp"

namespace dturbo::cli {

namespace {

// One row per line, characters '0' and '1'. Blank lines are ignored.
bool read_mask(const std::string& path, LayerShape& shape, std::vector<std::uint8_t>& mask,
               std::string& why) {
  std::ifstream in(path);
  if (!in) {
    why = "cannot open " + path;
    return false;
  }
  std::string line;
  std::size_t rows = 0;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (cols == 0) cols = line.size();
    if (line.size() != cols) {
      why = "row " + std::to_string(rows) + " has " + std::to_string(line.size()) + " cells, expected " +
            std::to_string(cols);
      return false;
    }
    for (char ch : line) {
      if (ch != '0' && ch != '1') {
        why = "row " + std::to_string(rows) + " holds '" + std::string(1, ch) + "', expected 0 or 1";
        return false;
      }
      mask.push_back(ch == '1');
    }
    ++rows;
  }
  if (rows == 0) {
    why = "empty mask";
    return false;
  }
  shape = {rows, cols};
  return true;
}

}  // namespace

int cmd_bench(const BenchArgs& a) {
  LayerShape shape{a.size, a.size};
  std::vector<std::uint8_t> mask;
  std::string source = "random";
  if (!a.mask.empty()) {
    std::string why;
    if (!std::filesystem::is_regular_file(a.mask)) {
      std::cerr << "error: mask file not found: " << a.mask << "\n";
      return kMissingFile;
    }
    if (!read_mask(a.mask, shape, mask, why)) {
      std::cerr << "error: invalid mask " << a.mask << ": " << why << "\n";
      return kBadInput;
    }
    source = a.mask;
  } else {
    if (!(a.density >= 0.0 && a.density <= 1.0) || a.size == 0 || a.min_side == 0 ||
        a.max_side < a.min_side) {
      std::cerr << "error: need density in [0, 1], size > 0 and 0 < min-side <= max-side\n";
      return kBadInput;
    }
    mask = random_cluster_mask(shape, a.density, a.min_side, a.max_side, a.seed);
  }
  if (a.reps < 1 || a.batch == 0) {
    std::cerr << "error: --reps and --batch must be positive\n";
    return kBadInput;
  }
  const ClusterMask cm = extract_clusters(shape, mask);
  const MatmulTiming t = masked_matmul_bench(cm, a.batch, a.reps, a.seed);
  const double density = static_cast<double>(cm.active_count()) / static_cast<double>(shape.size());
  const bool ok = t.max_abs_diff <= 1e-6;
  std::printf("mask %zux%zu density %.4f clusters %zu singletons %zu\n", shape.rows, shape.cols, density,
              cm.clusters.size(), cm.singletons.size());
  std::printf("dense %.6f s  clustered %.6f s  speedup %.3f  max |diff| %.3g %s\n", t.dense_seconds,
              t.clustered_seconds, t.speedup(), t.max_abs_diff, ok ? "ok" : "MISMATCH");

  const std::string dir = output_dir(a.out, "results");
  try {
    std::filesystem::create_directories(dir);
    const auto path = std::filesystem::path(dir) / "bench.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream csv(path, std::ios::app);
    if (!csv) throw std::runtime_error("cannot write " + path.string());
    if (fresh) csv << "source,rows,cols,density,clusters,singletons,batch,reps,dense_s,clustered_s,speedup,max_abs_diff\n";
    char line[512];
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%.6f,%zu,%zu,%zu,%d,%.9f,%.9f,%.4f,%.3g\n", source.c_str(),
                  shape.rows, shape.cols, density, cm.clusters.size(), cm.singletons.size(), a.batch, a.reps,
                  t.dense_seconds, t.clustered_seconds, t.speedup(), t.max_abs_diff);
    csv << line;
    std::cout << path.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return ok ? kOk : kFailure;
}

}  // namespace dturbo::cli
