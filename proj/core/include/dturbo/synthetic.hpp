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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dturbo/bayes_nn.hpp"
#include "dturbo/codec.hpp"

namespace dturbo {

/// One Gaussian blob per class with unit covariance. Class c has mean
/// separation * e_c when classes <= dim; otherwise the means sit evenly on a
/// circle of radius `separation` in the first two coordinates.
Dataset iid_gaussian_classification(std::size_t dim, int classes, std::size_t n,
                                    std::uint64_t seed, double separation = 3.0);

/// Class means used by iid_gaussian_classification, one row per class.
RowMatrix gaussian_class_means(std::size_t dim, int classes, double separation = 3.0);

struct PlantedTask {
  Dataset data;
  std::vector<std::vector<std::uint8_t>> masks;  // ground-truth support per layer
  std::vector<double> teacher_weights;           // flat, same layout as the network
};

/// Teacher network whose weights are N(0, 1) on the given rectangles and zero
/// elsewhere (biases zero). Inputs are N(0, I); labels are the argmax of the
/// teacher logits with ties broken uniformly at random, and each label is
/// replaced by a different random class with probability `label_noise`.
/// Throws std::invalid_argument if a rectangle leaves its layer or the layer
/// count does not match.
PlantedTask planted_teacher(const NetArch& arch, const std::vector<std::vector<Rect>>& clusters,
                            double label_noise, std::size_t n_samples, std::uint64_t seed);

/// |a and b| / |a or b| over two binary masks; 1 when both are empty.
double mask_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// FNV-1a over the feature bytes, labels and class count.
std::uint64_t dataset_hash(const Dataset& d);

}  // namespace dturbo
