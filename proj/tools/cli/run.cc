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
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <system_error>

#include "commands.hpp"
#include "dturbo/dataset.hpp"
#include "dturbo/io/config.hpp"
#include "dturbo/io/data.hpp"
#include "dturbo/io/results.hpp"

namespace dturbo::cli {

std::string output_dir(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("DTURBO_OUTPUT_DIR"); env && *env) return env;
  return fallback;
}

int cmd_run(const RunArgs& a) {
  namespace fs = std::filesystem;
  if (!fs::is_regular_file(a.config)) {
    std::cerr << "error: config file not found: " << a.config << "\n";
    return kMissingFile;
  }
  io::RunConfig cfg;
  io::LoadedData data;
  try {
    cfg = io::load_config(a.config);
    if (a.threads) cfg.experiment.threads = *a.threads;
    if (a.seed) cfg.experiment.fed.seed = *a.seed;
    data = io::load_data(cfg);
  } catch (const io::SchemaError& e) {
    std::cerr << "error: invalid config " << a.config << " at " << (e.pointer().empty() ? "/" : e.pointer())
              << ": " << e.what() << "\n";
    return kBadInput;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingFile;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }

  const fs::path dir = output_dir(a.out, cfg.output_dir.string());
  try {
    RoundCallback progress;
    if (!a.quiet) {
      progress = [](const RoundMetrics& m) {
        std::fprintf(stderr, "round %3d  acc %.4f  bits %llu  sparsity %.4f%s\n", m.round, m.accuracy,
                     static_cast<unsigned long long>(m.bits_up + m.bits_down), m.sparsity,
                     m.compressed ? "  [clustered]" : "");
      };
    }
    const ResultsBundle r = run_experiment(cfg.experiment, data.train, data.test, progress);
    const fs::path csv = dir / (cfg.name + ".csv");
    const fs::path summary = dir / (cfg.name + ".summary.json");
    io::write_text(csv, io::results_csv(r));
    io::write_text(summary, io::summary_json(cfg, r, data).dump(2) + "\n");
    std::cout << csv.string() << "\n" << summary.string() << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid config: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace dturbo::cli
