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

#include "dturbo/io/results.hpp"

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <system_error>

#include "dturbo/synthetic.hpp"

namespace dturbo::io {

using nlohmann::json;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

json metrics_json(const RoundMetrics& m) {
  json j = {{"round", m.round},
            {"acc", m.accuracy},
            {"bits_up", m.bits_up},
            {"bits_down", m.bits_down},
            {"bits_total", m.bits_up + m.bits_down},
            {"sparsity", m.sparsity}};
  j["nelb"] = m.nelb ? json(*m.nelb) : json(nullptr);
  return j;
}

}  // namespace

std::string results_csv(const ResultsBundle& r) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const RoundMetrics& m : r.rounds) {
    out += std::to_string(m.round) + ',' + fmt("%.6f", m.accuracy) + ',' + std::to_string(m.bits_up) + ',' +
           std::to_string(m.bits_down) + ',' + fmt("%.6f", m.sparsity) + ',' +
           (m.nelb ? fmt("%.10g", *m.nelb) : std::string()) + ',' + fmt("%.3f", m.seconds) + '\n';
  }
  return out;
}

std::vector<double> planted_iou(const ResultsBundle& r, const LoadedData& data) {
  std::vector<double> out;
  if (!r.final_server || data.planted_masks.empty()) return out;
  const auto masks = layer_masks(r.final_server->arch, r.final_server->pi_tilde);
  for (std::size_t l = 0; l < masks.size() && l < data.planted_masks.size(); ++l) {
    out.push_back(mask_iou(masks[l], data.planted_masks[l]));
  }
  return out;
}

json summary_json(const RunConfig& cfg, const ResultsBundle& r, const LoadedData& data) {
  json j;
  j["name"] = cfg.name;
  j["method"] = method_name(r.method);
  j["config"] = to_json(cfg);
  j["train_records"] = data.train.size();
  j["test_records"] = data.test.size();
  j["client_sizes"] = r.client_sizes;
  j["initial"] = metrics_json(r.initial);
  j["rounds_run"] = r.rounds.size();
  j["final"] = r.rounds.empty() ? metrics_json(r.initial) : metrics_json(r.rounds.back());
  json latch = nullptr;
  for (const RoundMetrics& m : r.rounds) {
    if (m.compressed) {
      latch = m.round;
      break;
    }
  }
  j["compressed_from_round"] = latch;
  const auto iou = planted_iou(r, data);
  if (!iou.empty()) j["planted_iou"] = iou;
  j["wall_seconds"] = r.wall_seconds;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + path.string());
  out << text;
  if (!out) throw std::system_error(errno, std::generic_category(), "write failed for " + path.string());
}

}  // namespace dturbo::io
