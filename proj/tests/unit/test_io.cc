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

#include <gtest/gtest.h>

#include <fstream>

#include "dturbo/io/config.hpp"
#include "dturbo/io/data.hpp"
#include "dturbo/io/results.hpp"
#include "test_util.hpp"

namespace dturbo::io {
namespace {

using nlohmann::json;

json minimal() { return json::parse(R"({"model": {"layers": [8, 16, 3]}})"); }

std::string pointer_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const SchemaError& e) {
    return e.pointer();
  }
  return "<accepted>";
}

TEST(Config, MinimalUsesDefaults) {
  const auto cfg = parse_config(minimal());
  EXPECT_EQ(cfg.experiment.method, Method::kTurboVbi);
  EXPECT_EQ(cfg.experiment.fed.clients, 10u);
  EXPECT_EQ(cfg.experiment.fed.bits_per_value, 16u);
  EXPECT_EQ(cfg.experiment.fed.min_cluster, 3u);
  EXPECT_EQ(cfg.experiment.fed.dirichlet_alpha, 0.5);
  EXPECT_EQ(cfg.data.kind, DataKind::kSyntheticGaussian);
  EXPECT_EQ(cfg.data.dim, 8u);
  EXPECT_EQ(cfg.data.classes, 3);
}

TEST(Config, ErrorsCarryJsonPointers) {
  EXPECT_EQ(pointer_of(json::object()), "/model");
  auto d = minimal();
  d["fed"] = {{"clients", 0}};
  EXPECT_EQ(pointer_of(d), "/fed/clients");
  d = minimal();
  d["fed"] = {{"clients", "ten"}};
  EXPECT_EQ(pointer_of(d), "/fed/clients");
  d = minimal();
  d["fed"] = {{"client", 3}};
  EXPECT_EQ(pointer_of(d), "/fed/client");
  d = minimal();
  d["prior"] = {{"a_bar", -2.0}};
  EXPECT_EQ(pointer_of(d), "/prior/a_bar");
  d = minimal();
  d["prior"] = {{"row_transition", {{0.5, 0.5}, {0.2, "x"}}}};
  EXPECT_EQ(pointer_of(d), "/prior/row_transition/1/1");
  d = minimal();
  d["model"]["layers"][1] = 0;
  EXPECT_EQ(pointer_of(d), "/model/layers/1");
  d = minimal();
  d["method"] = "dssm";
  EXPECT_EQ(pointer_of(d), "/method");
  d = minimal();
  d["spmp"] = {{"damping", 1.0}};
  EXPECT_EQ(pointer_of(d), "/spmp/damping");
  d = minimal();
  d["data"] = {{"kind", "planted"}, {"clusters", {{{0, 0, 4}}}}};
  EXPECT_EQ(pointer_of(d), "/data/clusters/0/0");
  d = minimal();
  d["data"] = {{"kind", "parquet"}};
  EXPECT_EQ(pointer_of(d), "/data/kind");
}

TEST(Config, EffectiveConfigRoundTrips) {
  for (const char* name : {"default.json", "planted.json"}) {
    const auto cfg = load_config(testing::source_dir() / "configs" / name);
    const json echo = to_json(cfg);
    const auto again = parse_config(echo);
    EXPECT_EQ(to_json(again), echo) << name;
  }
}

TEST(Config, EchoReproducesResults) {
  auto cfg = load_config(testing::source_dir() / "configs/planted.json");
  cfg.experiment.fed.rounds = 4;
  const auto data = load_data(cfg);
  const auto a = run_experiment(cfg.experiment, data.train, data.test);
  const auto echo = parse_config(to_json(cfg));
  const auto data2 = load_data(echo);
  const auto b = run_experiment(echo.experiment, data2.train, data2.test);
  EXPECT_EQ(results_csv(a), results_csv(b));
}

TEST(Config, MalformedJson) {
  const auto path = std::filesystem::temp_directory_path() / "dturbo_bad_config.json";
  std::ofstream(path) << "{ \"model\": ";
  EXPECT_THROW(load_config(path), SchemaError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config("/nonexistent/config.json"), std::system_error);
}

TEST(Data, PlantedSplitAndMasks) {
  auto d = json::parse(R"({"model": {"layers": [32, 32]},
    "data": {"kind": "planted", "clusters": [[[4, 4, 6, 6]]], "train": 300, "test": 100, "seed": 2}})");
  const auto cfg = parse_config(d);
  const auto data = load_data(cfg);
  EXPECT_EQ(data.train.size(), 300u);
  EXPECT_EQ(data.test.size(), 100u);
  ASSERT_EQ(data.planted_masks.size(), 1u);
  EXPECT_EQ(std::count(data.planted_masks[0].begin(), data.planted_masks[0].end(), 1), 36);
}

TEST(Data, CsvPathsResolveAgainstConfigDir) {
  const auto dir = std::filesystem::temp_directory_path() / "dturbo_csv_cfg";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "train.csv") << "0.5,1.0,0\n-0.5,2.0,1\n1.5,0.0,1\n";
  std::ofstream(dir / "config.json")
      << R"({"model": {"layers": [2, 2]}, "data": {"kind": "csv", "train": "train.csv"}})";
  const auto cfg = load_config(dir / "config.json");
  const auto data = load_data(cfg);
  EXPECT_EQ(data.train.size(), 3u);
  EXPECT_EQ(data.train.labels, (std::vector<int>{0, 1, 1}));
  EXPECT_TRUE(data.test.empty());
  std::filesystem::remove_all(dir);
}

TEST(Data, IdxFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "dturbo_idx";
  std::filesystem::create_directories(dir);
  {
    std::ofstream img(dir / "img", std::ios::binary);
    const unsigned char head[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2};
    img.write(reinterpret_cast<const char*>(head), sizeof head);
    const unsigned char px[] = {0, 255, 10, 20, 30, 40, 50, 60};
    img.write(reinterpret_cast<const char*>(px), sizeof px);
    std::ofstream lab(dir / "lab", std::ios::binary);
    const unsigned char lhead[] = {0, 0, 8, 1, 0, 0, 0, 2, 1, 0};
    lab.write(reinterpret_cast<const char*>(lhead), sizeof lhead);
  }
  const auto cfg = parse_config(json::parse(R"({"model": {"layers": [4, 2]},
    "data": {"kind": "idx", "train_images": "img", "train_labels": "lab"}})"),
                                dir);
  const auto data = load_data(cfg);
  ASSERT_EQ(data.train.size(), 2u);
  EXPECT_EQ(data.train.dim(), 4u);
  EXPECT_EQ(data.train.labels, (std::vector<int>{1, 0}));
  std::filesystem::remove_all(dir);
}

TEST(Results, CsvLayout) {
  auto cfg = load_config(testing::source_dir() / "configs/planted.json");
  cfg.experiment.fed.rounds = 2;
  const auto data = load_data(cfg);
  const auto r = run_experiment(cfg.experiment, data.train, data.test);
  const std::string csv = results_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const auto s = summary_json(cfg, r, data);
  EXPECT_EQ(s["rounds_run"], 2);
  EXPECT_EQ(s["config"], to_json(cfg));
  EXPECT_EQ(s["planted_iou"].size(), 1u);
  EXPECT_TRUE(s["initial"].contains("acc"));
}

}  // namespace
}  // namespace dturbo::io
