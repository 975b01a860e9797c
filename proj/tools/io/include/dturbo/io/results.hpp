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
// Run outputs. The CSV has one row per round with the columns
// round,acc,bits_up,bits_down,sparsity,nelb,seconds. Bits are cumulative over
// all clients, sparsity is the fraction of nonzero weights, nelb is empty for
// the baselines, seconds is 0 unless timing is enabled.

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dturbo/fed_sim.hpp"
#include "dturbo/io/config.hpp"
#include "dturbo/io/data.hpp"

namespace dturbo::io {

inline constexpr const char* kCsvHeader = "round,acc,bits_up,bits_down,sparsity,nelb,seconds";

std::string results_csv(const ResultsBundle& r);

/// Effective config, initial and final metrics, latch round, client sizes and,
/// for planted tasks, per-layer IoU of the kept mask against the planted one.
nlohmann::json summary_json(const RunConfig& cfg, const ResultsBundle& r, const LoadedData& data);

/// Per-layer IoU between the final q(s = 1) >= 0.5 mask and the planted masks.
std::vector<double> planted_iou(const ResultsBundle& r, const LoadedData& data);

/// Writes `text` to `path`, creating parent directories. Throws
/// std::system_error on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dturbo::io
