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

#include "dturbo/io/config.hpp"

#include <cerrno>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>

namespace dturbo::io {

using nlohmann::json;

namespace {

// One JSON object being read. Tracks consumed keys so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {
    if (!j_.is_object()) throw SchemaError(ptr_, "expected an object");
  }

  std::string at(const std::string& key) const { return ptr_ + "/" + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw SchemaError(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw SchemaError(at(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<std::int64_t>() >= 0) {
          out = static_cast<Int>(v->get<std::uint64_t>());
          return;
        }
        throw SchemaError(at(key), "expected a non-negative integer");
      } else {
        const auto x = v->get<std::int64_t>();
        if (x < std::numeric_limits<Int>::min() || x > std::numeric_limits<Int>::max()) {
          throw SchemaError(at(key), "integer out of range");
        }
        out = static_cast<Int>(x);
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw SchemaError(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw SchemaError(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void path(const std::string& key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    string(key, s);
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw SchemaError(at(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

TransitionMatrix parse_transition(const json& v, const std::string& ptr) {
  if (!v.is_array() || v.size() != 2) throw SchemaError(ptr, "expected a 2x2 array");
  TransitionMatrix t;
  for (int r = 0; r < 2; ++r) {
    const json& row = v[static_cast<std::size_t>(r)];
    const std::string rp = ptr + "/" + std::to_string(r);
    if (!row.is_array() || row.size() != 2) throw SchemaError(rp, "expected a row of 2 numbers");
    for (int c = 0; c < 2; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) {
        throw SchemaError(rp + "/" + std::to_string(c), "expected a number");
      }
      t.p[r][c] = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return t;
}

json transition_json(const TransitionMatrix& t) {
  return json::array({json::array({t.p[0][0], t.p[0][1]}), json::array({t.p[1][0], t.p[1][1]})});
}

std::vector<std::vector<Rect>> parse_clusters(const json& v, const std::string& ptr) {
  if (!v.is_array()) throw SchemaError(ptr, "expected one array of rectangles per layer");
  std::vector<std::vector<Rect>> out;
  for (std::size_t l = 0; l < v.size(); ++l) {
    const std::string lp = ptr + "/" + std::to_string(l);
    if (!v[l].is_array()) throw SchemaError(lp, "expected an array of [row, col, height, width]");
    std::vector<Rect> layer;
    for (std::size_t k = 0; k < v[l].size(); ++k) {
      const json& r = v[l][k];
      const std::string rp = lp + "/" + std::to_string(k);
      if (!r.is_array() || r.size() != 4) throw SchemaError(rp, "expected [row, col, height, width]");
      std::uint32_t f[4];
      for (std::size_t i = 0; i < 4; ++i) {
        if (!r[i].is_number_unsigned()) {
          throw SchemaError(rp + "/" + std::to_string(i), "expected a non-negative integer");
        }
        f[i] = r[i].get<std::uint32_t>();
      }
      layer.push_back({f[0], f[1], f[2], f[3]});
    }
    out.push_back(std::move(layer));
  }
  return out;
}

// Core validation reports dotted field names ("fed.clients must ...").
// Convert the leading name to a pointer.
SchemaError locate(const ConfigError& e) {
  std::string msg = e.what();
  const auto stop = msg.find_first_of(" :");
  std::string field = msg.substr(0, stop);
  if (field.empty() || field.find('.') == std::string::npos) {
    return SchemaError("", msg);
  }
  std::string ptr = "/" + field;
  for (auto& ch : ptr) {
    if (ch == '.') ch = '/';
  }
  std::string rest = stop == std::string::npos ? "" : msg.substr(stop);
  while (!rest.empty() && (rest.front() == ' ' || rest.front() == ':')) rest.erase(rest.begin());
  return SchemaError(ptr, rest.empty() ? "invalid value" : rest);
}

void check_prior(const HierPrior& p) {
  const auto v = prior_violations(p);
  if (v.empty()) return;
  // Messages start with the field name, or "a/b" and "a_bar/b_bar" for ratios.
  std::string field = v.front().substr(0, v.front().find(' '));
  field = field.substr(0, field.find('/'));
  throw SchemaError("/prior/" + field, v.front());
}

}  // namespace

std::string data_kind_name(DataKind k) {
  switch (k) {
    case DataKind::kSyntheticGaussian:
      return "synthetic_gaussian";
    case DataKind::kPlanted:
      return "planted";
    case DataKind::kIdx:
      return "idx";
    case DataKind::kCsv:
      return "csv";
  }
  return "synthetic_gaussian";
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  ExperimentConfig& x = cfg.experiment;
  Section top(doc, "");
  top.string("name", cfg.name);
  std::string out_dir = cfg.output_dir.string();
  top.string("output_dir", out_dir);
  cfg.output_dir = out_dir;
  if (const json* m = top.find("method")) {
    if (!m->is_string()) throw SchemaError("/method", "expected a string");
    try {
      x.method = parse_method(m->get<std::string>());
    } catch (const ConfigError& e) {
      throw SchemaError("/method", e.what());
    }
  }
  top.integer("threads", x.threads);
  top.boolean("timing", x.timing);
  top.integer("nelb_sample", x.nelb_sample);

  const json* model = top.find("model");
  if (!model) throw SchemaError("/model", "required field missing");
  {
    Section s(*model, "/model");
    const json* layers = s.find("layers");
    if (!layers) throw SchemaError("/model/layers", "required field missing");
    if (!layers->is_array()) throw SchemaError("/model/layers", "expected an array of widths");
    std::vector<std::size_t> widths;
    for (std::size_t i = 0; i < layers->size(); ++i) {
      const json& w = (*layers)[i];
      if (!w.is_number_unsigned() || w.get<std::uint64_t>() == 0) {
        throw SchemaError("/model/layers/" + std::to_string(i), "expected a positive integer");
      }
      widths.push_back(w.get<std::size_t>());
    }
    try {
      x.arch = NetArch::mlp(widths);
    } catch (const ConfigError& e) {
      throw SchemaError("/model/layers", e.what());
    }
    s.finish();
  }

  if (const json* v = top.find("fed")) {
    Section s(*v, "/fed");
    s.integer("clients", x.fed.clients);
    s.integer("rounds", x.fed.rounds);
    s.integer("local_steps", x.fed.local_steps);
    s.number("dirichlet_alpha", x.fed.dirichlet_alpha);
    s.integer("batch_size", x.fed.batch_size);
    s.integer("seed", x.fed.seed);
    s.integer("bits_per_value", x.fed.bits_per_value);
    s.integer("min_cluster", x.fed.min_cluster);
    s.number("mask_stable_tol", x.fed.mask_stable_tol);
    s.integer("mask_stable_rounds", x.fed.mask_stable_rounds);
    s.finish();
  }
  if (const json* v = top.find("optim")) {
    Section s(*v, "/optim");
    s.number("eta0", x.schedule.eta0);
    s.number("tau", x.schedule.tau);
    s.number("init_sigma", x.init.init_sigma);
    s.number("init_scale", x.init.init_scale);
    s.number("init_support", x.init.init_support);
    s.finish();
  }
  if (const json* v = top.find("prior")) {
    Section s(*v, "/prior");
    s.number("a", x.prior.a);
    s.number("b", x.prior.b);
    s.number("a_bar", x.prior.a_bar);
    s.number("b_bar", x.prior.b_bar);
    s.number("init_active", x.prior.init_active);
    if (const json* t = s.find("row_transition")) x.prior.row_transition = parse_transition(*t, "/prior/row_transition");
    if (const json* t = s.find("col_transition")) x.prior.col_transition = parse_transition(*t, "/prior/col_transition");
    s.finish();
  }
  if (const json* v = top.find("spmp")) {
    Section s(*v, "/spmp");
    s.integer("max_iters", x.spmp.max_iters);
    s.number("damping", x.spmp.damping);
    s.number("tol", x.spmp.tol);
    s.finish();
  }
  if (const json* v = top.find("baselines")) {
    Section s(*v, "/baselines");
    s.number("topk_fraction", x.baselines.topk_fraction);
    s.integer("quant_bits", x.baselines.quant_bits);
    s.finish();
  }

  DataSpec& d = cfg.data;
  d.dim = x.arch.input_dim();
  d.classes = static_cast<int>(x.arch.num_classes());
  if (const json* v = top.find("data")) {
    Section s(*v, "/data");
    std::string kind = data_kind_name(d.kind);
    s.string("kind", kind);
    if (kind == "synthetic_gaussian") {
      d.kind = DataKind::kSyntheticGaussian;
    } else if (kind == "planted") {
      d.kind = DataKind::kPlanted;
    } else if (kind == "idx") {
      d.kind = DataKind::kIdx;
    } else if (kind == "csv") {
      d.kind = DataKind::kCsv;
    } else {
      throw SchemaError("/data/kind", "unknown value '" + kind + "' (synthetic_gaussian, planted, idx, csv)");
    }
    s.integer("seed", d.seed);
    switch (d.kind) {
      case DataKind::kSyntheticGaussian:
        s.integer("dim", d.dim);
        s.integer("classes", d.classes);
        s.number("separation", d.separation);
        s.integer("train", d.train);
        s.integer("test", d.test);
        if (d.classes < 1) throw SchemaError("/data/classes", "must be positive");
        break;
      case DataKind::kPlanted:
        s.integer("train", d.train);
        s.integer("test", d.test);
        s.number("label_noise", d.label_noise);
        if (const json* c = s.find("clusters")) d.clusters = parse_clusters(*c, "/data/clusters");
        if (d.clusters.size() > x.arch.num_layers()) {
          throw SchemaError("/data/clusters", "more layers than the model has");
        }
        if (!(d.label_noise >= 0.0 && d.label_noise <= 1.0)) {
          throw SchemaError("/data/label_noise", "must lie in [0, 1]");
        }
        break;
      case DataKind::kIdx:
        s.path("train_images", d.train_images, base_dir);
        s.path("train_labels", d.train_labels, base_dir);
        s.path("test_images", d.test_images, base_dir);
        s.path("test_labels", d.test_labels, base_dir);
        if (d.train_images.empty()) throw SchemaError("/data/train_images", "required field missing");
        if (d.train_labels.empty()) throw SchemaError("/data/train_labels", "required field missing");
        break;
      case DataKind::kCsv:
        s.path("train", d.train_csv, base_dir);
        s.path("test", d.test_csv, base_dir);
        s.integer("label_column", d.label_column);
        s.integer("num_classes", d.num_classes);
        if (d.train_csv.empty()) throw SchemaError("/data/train", "required field missing");
        break;
    }
    s.finish();
  }
  top.finish();

  check_prior(x.prior);
  try {
    x.validate();
  } catch (const ConfigError& e) {
    throw locate(e);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                            "cannot open config " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json to_json(const RunConfig& cfg) {
  const ExperimentConfig& x = cfg.experiment;
  json layers = json::array();
  for (const LayerShape& s : x.arch.layers()) {
    if (layers.empty()) layers.push_back(s.rows);
    layers.push_back(s.cols);
  }
  json doc;
  doc["name"] = cfg.name;
  doc["method"] = method_name(x.method);
  doc["output_dir"] = cfg.output_dir.string();
  doc["threads"] = x.threads;
  doc["timing"] = x.timing;
  doc["nelb_sample"] = x.nelb_sample;
  doc["model"] = {{"layers", layers}};
  doc["fed"] = {{"clients", x.fed.clients},
                {"rounds", x.fed.rounds},
                {"local_steps", x.fed.local_steps},
                {"dirichlet_alpha", x.fed.dirichlet_alpha},
                {"batch_size", x.fed.batch_size},
                {"seed", x.fed.seed},
                {"bits_per_value", x.fed.bits_per_value},
                {"min_cluster", x.fed.min_cluster},
                {"mask_stable_tol", x.fed.mask_stable_tol},
                {"mask_stable_rounds", x.fed.mask_stable_rounds}};
  doc["optim"] = {{"eta0", x.schedule.eta0},
                  {"tau", x.schedule.tau},
                  {"init_sigma", x.init.init_sigma},
                  {"init_scale", x.init.init_scale},
                  {"init_support", x.init.init_support}};
  doc["prior"] = {{"a", x.prior.a},
                  {"b", x.prior.b},
                  {"a_bar", x.prior.a_bar},
                  {"b_bar", x.prior.b_bar},
                  {"init_active", x.prior.init_active},
                  {"row_transition", transition_json(x.prior.row_transition)},
                  {"col_transition", transition_json(x.prior.col_transition)}};
  doc["spmp"] = {{"max_iters", x.spmp.max_iters}, {"damping", x.spmp.damping}, {"tol", x.spmp.tol}};
  doc["baselines"] = {{"topk_fraction", x.baselines.topk_fraction},
                      {"quant_bits", x.baselines.quant_bits}};

  const DataSpec& d = cfg.data;
  json data = {{"kind", data_kind_name(d.kind)}, {"seed", d.seed}};
  switch (d.kind) {
    case DataKind::kSyntheticGaussian:
      data["dim"] = d.dim;
      data["classes"] = d.classes;
      data["separation"] = d.separation;
      data["train"] = d.train;
      data["test"] = d.test;
      break;
    case DataKind::kPlanted: {
      data["train"] = d.train;
      data["test"] = d.test;
      data["label_noise"] = d.label_noise;
      json cl = json::array();
      for (const auto& layer : d.clusters) {
        json l = json::array();
        for (const Rect& r : layer) l.push_back({r.row, r.col, r.height, r.width});
        cl.push_back(l);
      }
      data["clusters"] = cl;
      break;
    }
    case DataKind::kIdx:
      data["train_images"] = std::filesystem::absolute(d.train_images).string();
      data["train_labels"] = std::filesystem::absolute(d.train_labels).string();
      if (!d.test_images.empty()) data["test_images"] = std::filesystem::absolute(d.test_images).string();
      if (!d.test_labels.empty()) data["test_labels"] = std::filesystem::absolute(d.test_labels).string();
      break;
    case DataKind::kCsv:
      data["train"] = std::filesystem::absolute(d.train_csv).string();
      if (!d.test_csv.empty()) data["test"] = std::filesystem::absolute(d.test_csv).string();
      data["label_column"] = d.label_column;
      data["num_classes"] = d.num_classes;
      break;
  }
  doc["data"] = data;
  return doc;
}

}  // namespace dturbo::io
