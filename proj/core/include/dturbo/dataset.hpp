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
// Dataset files: IDX image/label pairs (unsigned byte payloads, pixels scaled
// to [0, 1]) and CSV with one integer label column.

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "dturbo/bayes_nn.hpp"

namespace dturbo {

/// I/O or format failure; the message starts with the offending path.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// label_column < 0 counts from the end (-1 = last). A first line whose cells
/// do not all parse as numbers is treated as a header. num_classes is
/// max(label) + 1 unless `num_classes` > 0 is given.
Dataset load_csv(const std::filesystem::path& path, int label_column = -1, int num_classes = 0);

/// Writes features then the label as the last column, with a header line.
void save_csv(const Dataset& data, const std::filesystem::path& path);

}  // namespace dturbo
