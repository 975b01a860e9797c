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
#include <vector>

#include "dturbo/bayes_nn.hpp"
#include "dturbo/io/config.hpp"

namespace dturbo::io {

struct LoadedData {
  Dataset train;
  Dataset test;
  /// Ground-truth support per layer, planted tasks only.
  std::vector<std::vector<std::uint8_t>> planted_masks;
};

/// Generates or reads the datasets named by `cfg.data`. File problems throw
/// DatasetError; shape problems throw SchemaError at /data.
LoadedData load_data(const RunConfig& cfg);

}  // namespace dturbo::io
