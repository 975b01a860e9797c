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

#include "dturbo/synthetic.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace dturbo {

RowMatrix gaussian_class_means(std::size_t dim, int classes, double separation) {
  RowMatrix means = RowMatrix::Zero(std::max(classes, 0), static_cast<Eigen::Index>(dim));
  if (classes <= 1 || dim == 0) return means;
  if (static_cast<std::size_t>(classes) <= dim) {
    for (int c = 0; c < classes; ++c) means(c, c) = separation;
  } else {
    for (int c = 0; c < classes; ++c) {
      const double angle = 2.0 * std::numbers::pi * c / classes;
      means(c, 0) = separation * std::cos(angle);
      if (dim > 1) means(c, 1) = separation * std::sin(angle);
    }
  }
  return means;
}

Dataset iid_gaussian_classification(std::size_t dim, int classes, std::size_t n,
                                    std::uint64_t seed, double separation) {
  if (classes < 1) throw std::invalid_argument("iid_gaussian_classification: need >= 1 class");
  const RowMatrix means = gaussian_class_means(dim, classes, separation);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.num_classes = classes;
  d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = pick(rng);
    d.labels[i] = y;
    for (std::size_t j = 0; j < dim; ++j) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          means(y, static_cast<Eigen::Index>(j)) + normal(rng);
    }
  }
  return d;
}

PlantedTask planted_teacher(const NetArch& arch, const std::vector<std::vector<Rect>>& clusters,
                            double label_noise, std::size_t n_samples, std::uint64_t seed) {
  if (clusters.size() != arch.num_layers()) {
    throw std::invalid_argument("planted_teacher: cluster spec has " +
                                std::to_string(clusters.size()) + " layers, network has " +
                                std::to_string(arch.num_layers()));
  }
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) {
    throw std::invalid_argument("planted_teacher: label noise must lie in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  PlantedTask task;
  task.teacher_weights.assign(arch.weight_count(), 0.0);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const LayerShape& s = arch.layers()[l];
    std::vector<std::uint8_t> mask(s.size(), 0);
    for (const Rect& r : clusters[l]) {
      if (r.height == 0 || r.width == 0 || r.row + r.height > s.rows || r.col + r.width > s.cols) {
        throw std::invalid_argument("planted_teacher: rectangle outside layer " + std::to_string(l));
      }
      for (std::size_t i = r.row; i < r.row + r.height; ++i) {
        for (std::size_t j = r.col; j < r.col + r.width; ++j) mask[i * s.cols + j] = 1;
      }
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (mask[i]) task.teacher_weights[arch.weight_offset(l) + i] = normal(rng);
    }
    task.masks.push_back(std::move(mask));
  }

  Dataset& d = task.data;
  const int classes = static_cast<int>(arch.num_classes());
  d.num_classes = classes;
  d.features.resize(static_cast<Eigen::Index>(n_samples), static_cast<Eigen::Index>(arch.input_dim()));
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.features.cols(); ++j) d.features(i, j) = normal(rng);
  }
  const std::vector<double> zero_bias(arch.bias_count(), 0.0);
  const RowMatrix logits = forward_logits(arch, task.teacher_weights, zero_bias, d.features);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  d.labels.resize(n_samples);
  std::vector<int> ties;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto row = logits.row(static_cast<Eigen::Index>(i));
    const double best = row.maxCoeff();
    ties.clear();
    for (int c = 0; c < classes; ++c) {
      if (row(c) == best) ties.push_back(c);
    }
    int y = ties[0];
    if (ties.size() > 1) {
      std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
      y = ties[pick(rng)];
    }
    if (classes > 1 && unit(rng) < label_noise) {
      std::uniform_int_distribution<int> other(0, classes - 2);
      const int o = other(rng);
      y = o >= y ? o + 1 : o;
    }
    d.labels[i] = y;
  }
  return task;
}

double mask_iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("mask_iou: size mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::uint64_t dataset_hash(const Dataset& d) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&d.num_classes, sizeof(d.num_classes));
  const auto rows = static_cast<std::uint64_t>(d.features.rows());
  const auto cols = static_cast<std::uint64_t>(d.features.cols());
  mix(&rows, sizeof(rows));
  mix(&cols, sizeof(cols));
  mix(d.features.data(), sizeof(double) * static_cast<std::size_t>(d.features.size()));
  mix(d.labels.data(), sizeof(int) * d.labels.size());
  return h;
}

}  // namespace dturbo
