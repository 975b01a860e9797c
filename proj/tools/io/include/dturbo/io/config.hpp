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
// Experiment configuration documents. The schema is described in
// docs/config.md. Every field is optional except `model.layers`; omitted
// fields take the library defaults, and to_json() writes the fully expanded
// form back out.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dturbo/codec.hpp"
#include "dturbo/fed_sim.hpp"

namespace dturbo::io {

/// A schema or value error, located by a JSON pointer ("/fed/clients").
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

enum class DataKind { kSyntheticGaussian, kPlanted, kIdx, kCsv };

struct DataSpec {
  DataKind kind = DataKind::kSyntheticGaussian;
  std::uint64_t seed = 0;

  // synthetic_gaussian; dim and classes default to the model's widths.
  std::size_t dim = 0;
  int classes = 0;
  double separation = 3.0;

  // synthetic_gaussian and planted: the first `train` generated records train,
  // the next `test` evaluate.
  std::size_t train = 4000;
  std::size_t test = 1000;

  // planted
  std::vector<std::vector<Rect>> clusters;  // per layer
  double label_noise = 0.0;

  // idx and csv. Relative paths resolve against the config file's directory.
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  int label_column = -1;
  int num_classes = 0;
};

struct RunConfig {
  std::string name = "run";
  ExperimentConfig experiment;
  DataSpec data;
  std::filesystem::path output_dir = "results";
};

std::string data_kind_name(DataKind k);

/// Throws SchemaError on unknown keys, wrong types and invalid values.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads and parses a file. A missing or unreadable file throws
/// std::system_error; malformed JSON throws SchemaError at "".
RunConfig load_config(const std::filesystem::path& path);

/// The effective configuration with every default filled in. Parsing the
/// result gives back an equivalent RunConfig.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace dturbo::io
