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

#include "dturbo/io/data.hpp"

#include <numeric>

#include "dturbo/dataset.hpp"
#include "dturbo/synthetic.hpp"

namespace dturbo::io {

namespace {

void split(const Dataset& all, std::size_t n_train, LoadedData& out) {
  std::vector<std::size_t> tr(n_train);
  std::iota(tr.begin(), tr.end(), std::size_t{0});
  std::vector<std::size_t> te(all.size() - n_train);
  std::iota(te.begin(), te.end(), n_train);
  out.train = all.subset(tr);
  out.test = all.subset(te);
}

}  // namespace

LoadedData load_data(const RunConfig& cfg) {
  const DataSpec& d = cfg.data;
  const NetArch& arch = cfg.experiment.arch;
  LoadedData out;
  switch (d.kind) {
    case DataKind::kSyntheticGaussian:
      split(iid_gaussian_classification(d.dim, d.classes, d.train + d.test, d.seed, d.separation), d.train,
            out);
      break;
    case DataKind::kPlanted: {
      auto clusters = d.clusters;
      clusters.resize(arch.num_layers());
      PlantedTask task;
      try {
        task = planted_teacher(arch, clusters, d.label_noise, d.train + d.test, d.seed);
      } catch (const std::invalid_argument& e) {
        throw SchemaError("/data/clusters", e.what());
      }
      split(task.data, d.train, out);
      out.planted_masks = std::move(task.masks);
      break;
    }
    case DataKind::kIdx:
      out.train = load_idx(d.train_images, d.train_labels);
      if (!d.test_images.empty()) out.test = load_idx(d.test_images, d.test_labels);
      break;
    case DataKind::kCsv:
      out.train = load_csv(d.train_csv, d.label_column, d.num_classes);
      if (!d.test_csv.empty()) out.test = load_csv(d.test_csv, d.label_column, d.num_classes);
      break;
  }
  if (out.test.empty()) out.test.features.resize(0, static_cast<Eigen::Index>(out.train.dim()));
  out.test.num_classes = std::max(out.test.num_classes, out.train.num_classes);
  return out;
}

}  // namespace dturbo::io
