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

#include "dturbo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace dturbo {

namespace {

[[noreturn]] void fail(const std::filesystem::path& p, const std::string& what) {
  throw DatasetError(p.string() + ": " + what);
}

std::vector<unsigned char> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(p, "cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

// Returns dims; checks the unsigned-byte type code and the payload length.
std::vector<std::size_t> idx_header(const std::vector<unsigned char>& b, const std::filesystem::path& p,
                                    std::size_t* payload_at) {
  if (b.size() < 4 || b[0] != 0 || b[1] != 0) fail(p, "not an IDX file");
  if (b[2] != 0x08) fail(p, "only unsigned-byte IDX payloads are supported");
  const std::size_t ndim = b[3];
  if (ndim == 0 || b.size() < 4 + 4 * ndim) fail(p, "truncated IDX header");
  std::vector<std::size_t> dims(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    dims[i] = be32(b, 4 + 4 * i);
    count *= dims[i];
  }
  *payload_at = 4 + 4 * ndim;
  if (b.size() != *payload_at + count) fail(p, "payload length does not match header");
  return dims;
}

bool parse_double(const std::string& s, double* out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  if (first == last) return false;
  auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_all(images);
  const auto lb = read_all(labels);
  std::size_t ioff = 0;
  std::size_t loff = 0;
  const auto idims = idx_header(ib, images, &ioff);
  const auto ldims = idx_header(lb, labels, &loff);
  if (ldims.size() != 1) fail(labels, "label file must be one-dimensional");
  if (idims[0] != ldims[0]) {
    fail(images, "holds " + std::to_string(idims[0]) + " images but " + labels.string() + " holds " +
                     std::to_string(ldims[0]) + " labels");
  }
  std::size_t dim = 1;
  for (std::size_t i = 1; i < idims.size(); ++i) dim *= idims[i];

  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(idims[0]), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < idims[0]; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          ib[ioff + i * dim + j] / 255.0;
    }
  }
  d.labels.resize(ldims[0]);
  int mx = -1;
  for (std::size_t i = 0; i < ldims[0]; ++i) {
    d.labels[i] = lb[loff + i];
    mx = std::max(mx, d.labels[i]);
  }
  d.num_classes = mx + 1;
  return d;
}

Dataset load_csv(const std::filesystem::path& path, int label_column, int num_classes) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t width = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    std::vector<double> vals(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i) numeric = numeric && parse_double(cells[i], &vals[i]);
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = cells.size();  // header
        continue;
      }
      fail(path, "line " + std::to_string(line_no) + ": non-numeric cell");
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      fail(path, "line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                     " cells, found " + std::to_string(cells.size()));
    }
    if (width < 2) fail(path, "need at least one feature and one label column");
    const int lc = label_column < 0 ? static_cast<int>(width) + label_column : label_column;
    if (lc < 0 || lc >= static_cast<int>(width)) fail(path, "label column out of range");
    const double lv = vals[static_cast<std::size_t>(lc)];
    if (lv != std::floor(lv) || lv < 0) {
      fail(path, "line " + std::to_string(line_no) + ": label is not a nonnegative integer");
    }
    labels.push_back(static_cast<int>(lv));
    vals.erase(vals.begin() + lc);
    rows.push_back(std::move(vals));
  }
  Dataset d;
  const std::size_t dim = width == 0 ? 0 : width - 1;
  d.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  d.labels = std::move(labels);
  const int mx = d.labels.empty() ? -1 : *std::max_element(d.labels.begin(), d.labels.end());
  d.num_classes = num_classes > 0 ? num_classes : mx + 1;
  if (mx >= d.num_classes) fail(path, "label " + std::to_string(mx) + " exceeds the class count");
  return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  for (Eigen::Index j = 0; j < data.features.cols(); ++j) out << 'x' << j << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      out << data.features(static_cast<Eigen::Index>(i), j) << ',';
    }
    out << data.labels[i] << '\n';
  }
  if (!out) fail(path, "write failed");
}

}  // namespace dturbo
