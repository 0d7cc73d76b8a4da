// Copyright 2026 The prong Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "assets.hpp"

namespace prong::cli {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

bool has_type(const Json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "number") return value.is_number();
  if (type == "integer") {
    if (value.is_number_integer()) return true;
    if (!value.is_number_float()) return false;
    const double v = value.get<double>();
    return std::isfinite(v) && v == std::floor(v);
  }
  return false;
}

// Checks the subset of JSON Schema used by config.schema.json.
void check(const Json& value, const Json& schema, const std::string& where,
           std::vector<std::string>& problems) {
  const std::string at = where.empty() ? "/" : where;
  if (schema.contains("enum")) {
    const auto& options = schema["enum"];
    if (std::find(options.begin(), options.end(), value) == options.end()) {
      problems.push_back(at + ": " + value.dump() + " is not one of " + options.dump());
    }
    return;
  }
  if (schema.contains("type")) {
    const std::string type = schema["type"].get<std::string>();
    if (!has_type(value, type)) {
      problems.push_back(at + ": expected " + type + ", got " + value.type_name());
      return;
    }
  }
  if (value.is_number()) {
    const double v = value.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>()) {
      problems.push_back(at + ": must be >= " + schema["minimum"].dump());
    }
    if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>()) {
      problems.push_back(at + ": must be > " + schema["exclusiveMinimum"].dump());
    }
    if (schema.contains("maximum") && v > schema["maximum"].get<double>()) {
      problems.push_back(at + ": must be <= " + schema["maximum"].dump());
    }
    if (schema.contains("exclusiveMaximum") && v >= schema["exclusiveMaximum"].get<double>()) {
      problems.push_back(at + ": must be < " + schema["exclusiveMaximum"].dump());
    }
  }
  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>()) {
      problems.push_back(at + ": needs at least " + schema["minItems"].dump() + " items");
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        check(value[i], schema["items"], where + "/" + std::to_string(i), problems);
      }
    }
  }
  if (value.is_object()) {
    const Json empty = Json::object();
    const Json& props = schema.contains("properties") ? schema["properties"] : empty;
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!value.contains(key.get<std::string>())) {
          problems.push_back(where + "/" + key.get<std::string>() + ": required key missing");
        }
      }
    }
    const bool closed = schema.value("additionalProperties", true) == false;
    for (const auto& [key, child] : value.items()) {
      const std::string path = where + "/" + key;
      if (props.contains(key)) {
        check(child, props[key], path, problems);
      } else if (closed) {
        problems.push_back(path + ": unknown key");
      }
    }
  }
}

template <typename T>
void read(const Json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj[key].get<T>();
}

template <typename T>
std::vector<T> read_list(const Json& obj, const char* key) {
  std::vector<T> out;
  if (obj.contains(key)) {
    for (const auto& v : obj[key]) out.push_back(v.get<T>());
  }
  return out;
}

std::vector<OptimizerKind> read_optimizers(const Json& obj, const char* key) {
  std::vector<OptimizerKind> out;
  for (const auto& name : read_list<std::string>(obj, key)) out.push_back(optimizer_from_string(name));
  return out;
}

fisher::BlockKind block_kind_from_string(const std::string& s) {
  return s == "exact" ? fisher::BlockKind::exact : fisher::BlockKind::factorized;
}

DataSource source_from_string(const std::string& s) {
  if (s == "mnist") return DataSource::mnist;
  if (s == "synthetic_digits") return DataSource::synthetic_digits;
  if (s == "synthetic_gaussian") return DataSource::synthetic_gaussian;
  return DataSource::automatic;
}

DataTask task_from_string(const std::string& s) {
  if (s == "classification") return DataTask::classification;
  if (s == "binary") return DataTask::binary;
  return DataTask::autoencoder;
}

Json optimizer_list(const std::vector<OptimizerKind>& kinds) {
  Json out = Json::array();
  for (auto k : kinds) out.push_back(std::string(to_string(k)));
  return out;
}

}  // namespace

SchemaError::SchemaError(std::vector<std::string> problems)
    : ValidationError("invalid config: " + join(problems)), problems_(std::move(problems)) {}

std::string_view to_string(DataSource source) {
  switch (source) {
    case DataSource::automatic: return "auto";
    case DataSource::mnist: return "mnist";
    case DataSource::synthetic_digits: return "synthetic_digits";
    case DataSource::synthetic_gaussian: return "synthetic_gaussian";
  }
  return "auto";
}

std::string_view to_string(DataTask task) {
  switch (task) {
    case DataTask::autoencoder: return "autoencoder";
    case DataTask::classification: return "classification";
    case DataTask::binary: return "binary";
  }
  return "autoencoder";
}

NetworkSpec ModelConfig::spec() const {
  if (widths.size() < 2) throw ValidationError("model.widths needs at least two entries");
  std::vector<Activation> acts(widths.size() - 1, activation);
  acts.back() = head;
  NetworkSpec s = NetworkSpec::chain(widths, acts);
  s.validate();
  return s;
}

std::size_t GridAxes::cell_count() const {
  auto n = [](std::size_t k) { return k == 0 ? std::size_t{1} : k; };
  return n(optimizer.size()) * n(learning_rate.size()) * n(momentum.size()) *
         n(batch_size.size()) * n(eigen_epsilon.size()) * n(rmsprop_decay.size()) *
         n(rmsprop_damping.size());
}

const Json& config_schema() {
  static const Json schema = Json::parse(assets::config_schema_text());
  return schema;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& p : assets::presets()) names.emplace_back(p.name);
  std::sort(names.begin(), names.end());
  return names;
}

Json preset(std::string_view name) {
  for (const auto& p : assets::presets()) {
    if (p.name == name) return Json::parse(p.text);
  }
  std::string known;
  for (const auto& n : preset_names()) known += " " + n;
  throw ValidationError("unknown preset '" + std::string(name) + "'; available:" + known);
}

std::vector<std::string> schema_problems(const Json& doc) {
  std::vector<std::string> problems;
  check(doc, config_schema(), "", problems);
  return problems;
}

ExperimentConfig parse_config(const Json& doc) {
  auto problems = schema_problems(doc);
  if (!problems.empty()) throw SchemaError(std::move(problems));

  ExperimentConfig c;
  read(doc, "experiment", c.experiment);
  read(doc, "seed", c.seed);
  read(doc, "output_dir", c.output_dir);
  if (doc.contains("optimizer")) c.optimizer = optimizer_from_string(doc["optimizer"].get<std::string>());

  if (doc.contains("data")) {
    const Json& d = doc["data"];
    if (d.contains("source")) c.data.source = source_from_string(d["source"].get<std::string>());
    read(d, "train_images", c.data.train_images);
    read(d, "train_labels", c.data.train_labels);
    read(d, "count", c.data.count);
    read(d, "validation", c.data.validation);
    read(d, "downsample", c.data.downsample);
    if (d.contains("task")) c.data.task = task_from_string(d["task"].get<std::string>());
    read(d, "gaussian_dim", c.data.gaussian_dim);
    read(d, "gaussian_decay", c.data.gaussian_decay);
    read(d, "seed", c.data.seed);
  }

  if (doc.contains("model")) {
    const Json& m = doc["model"];
    c.model.widths = read_list<std::size_t>(m, "widths");
    if (m.contains("activation")) c.model.activation = activation_from_string(m["activation"].get<std::string>());
    c.model.head = c.model.activation;
    if (m.contains("head")) c.model.head = activation_from_string(m["head"].get<std::string>());
    if (m.contains("loss")) c.model.loss = loss_from_string(m["loss"].get<std::string>());
    read(m, "init_seed", c.model.init_seed);
  }

  if (doc.contains("train")) {
    const Json& t = doc["train"];
    read(t, "learning_rate", c.train.learning_rate);
    read(t, "momentum", c.train.momentum);
    read(t, "batch_size", c.train.batch_size);
    read(t, "reparam_period", c.train.reparam_period);
    read(t, "stat_samples", c.train.stat_samples);
    read(t, "eigen_epsilon", c.train.eigen_epsilon);
    read(t, "rmsprop_decay", c.train.rmsprop_decay);
    read(t, "rmsprop_damping", c.train.rmsprop_damping);
    read(t, "max_updates", c.train.max_updates);
    read(t, "reset_momentum", c.train.reset_momentum);
    read(t, "rescale_decay", c.train.rescale_decay);
    read(t, "batchnorm_momentum", c.train.batchnorm_momentum);
    read(t, "freeze_whitening", c.freeze_whitening);
    if (t.contains("anneal")) {
      const Json& a = t["anneal"];
      read(a, "enabled", c.train.anneal.enabled);
      read(a, "eval_interval", c.train.anneal.eval_interval);
      read(a, "patience", c.train.anneal.patience);
      read(a, "min_relative_improvement", c.train.anneal.min_relative_improvement);
      read(a, "divisor", c.train.anneal.divisor);
    }
  }
  c.train.seed = c.seed;

  if (doc.contains("eval")) {
    const Json& e = doc["eval"];
    read(e, "interval", c.eval.interval);
    read(e, "train_rows", c.eval.train_rows);
    read(e, "record_wallclock", c.eval.record_wallclock);
  }

  if (doc.contains("fisher")) {
    const Json& f = doc["fisher"];
    c.fisher.layers = read_list<std::size_t>(f, "layers");
    if (f.contains("kinds")) {
      c.fisher.kinds.clear();
      for (const auto& k : read_list<std::string>(f, "kinds")) c.fisher.kinds.push_back(block_kind_from_string(k));
    }
    read(f, "samples", c.fisher.samples);
    if (f.contains("optimizers")) c.fisher.optimizers = read_optimizers(f, "optimizers");
    if (f.contains("heatmap_layer")) c.fisher.heatmap_layer = f["heatmap_layer"].get<std::size_t>();
    if (f.contains("heatmap_kind")) c.fisher.heatmap_kind = block_kind_from_string(f["heatmap_kind"].get<std::string>());
  }

  if (doc.contains("grid")) {
    const Json& g = doc["grid"];
    c.grid.optimizer = read_optimizers(g, "optimizer");
    c.grid.learning_rate = read_list<double>(g, "learning_rate");
    c.grid.momentum = read_list<double>(g, "momentum");
    c.grid.batch_size = read_list<std::size_t>(g, "batch_size");
    c.grid.eigen_epsilon = read_list<double>(g, "eigen_epsilon");
    c.grid.rmsprop_decay = read_list<double>(g, "rmsprop_decay");
    c.grid.rmsprop_damping = read_list<double>(g, "rmsprop_damping");
  }

  // Cross-field constraints the schema cannot express.
  std::vector<std::string> semantic;
  try {
    c.model.spec();
  } catch (const Error& e) {
    semantic.push_back(std::string("/model: ") + e.what());
  }
  try {
    c.train.validate();
  } catch (const Error& e) {
    semantic.push_back(std::string("/train: ") + e.what());
  }
  if (c.data.source == DataSource::mnist && c.data.train_images.empty()) {
    semantic.push_back("/data/train_images: required when source is mnist");
  }
  if (!semantic.empty()) throw SchemaError(std::move(semantic));
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json doc;
  doc["experiment"] = c.experiment;
  doc["seed"] = c.seed;
  doc["output_dir"] = c.output_dir;
  doc["optimizer"] = std::string(to_string(c.optimizer));
  doc["data"] = {
      {"source", std::string(to_string(c.data.source))},
      {"train_images", c.data.train_images},
      {"train_labels", c.data.train_labels},
      {"count", c.data.count},
      {"validation", c.data.validation},
      {"downsample", c.data.downsample},
      {"task", std::string(to_string(c.data.task))},
      {"gaussian_dim", c.data.gaussian_dim},
      {"gaussian_decay", c.data.gaussian_decay},
      {"seed", c.data.seed},
  };
  doc["model"] = {
      {"widths", c.model.widths},
      {"activation", std::string(to_string(c.model.activation))},
      {"head", std::string(to_string(c.model.head))},
      {"loss", std::string(to_string(c.model.loss))},
      {"init_seed", c.model.init_seed},
  };
  const TrainConfig& t = c.train;
  doc["train"] = {
      {"learning_rate", t.learning_rate},
      {"momentum", t.momentum},
      {"batch_size", t.batch_size},
      {"reparam_period", t.reparam_period},
      {"stat_samples", t.stat_samples},
      {"eigen_epsilon", t.eigen_epsilon},
      {"rmsprop_decay", t.rmsprop_decay},
      {"rmsprop_damping", t.rmsprop_damping},
      {"max_updates", t.max_updates},
      {"reset_momentum", t.reset_momentum},
      {"rescale_decay", t.rescale_decay},
      {"batchnorm_momentum", t.batchnorm_momentum},
      {"freeze_whitening", c.freeze_whitening},
      {"anneal",
       {{"enabled", t.anneal.enabled},
        {"eval_interval", t.anneal.eval_interval},
        {"patience", t.anneal.patience},
        {"min_relative_improvement", t.anneal.min_relative_improvement},
        {"divisor", t.anneal.divisor}}},
  };
  doc["eval"] = {
      {"interval", c.eval.interval},
      {"train_rows", c.eval.train_rows},
      {"record_wallclock", c.eval.record_wallclock},
  };
  Json kinds = Json::array();
  for (auto k : c.fisher.kinds) kinds.push_back(std::string(fisher::to_string(k)));
  doc["fisher"] = {
      {"layers", c.fisher.layers},
      {"kinds", kinds},
      {"samples", c.fisher.samples},
      {"optimizers", optimizer_list(c.fisher.optimizers)},
      {"heatmap_kind", std::string(fisher::to_string(c.fisher.heatmap_kind))},
  };
  if (c.fisher.heatmap_layer) doc["fisher"]["heatmap_layer"] = *c.fisher.heatmap_layer;
  Json grid = Json::object();
  if (!c.grid.optimizer.empty()) grid["optimizer"] = optimizer_list(c.grid.optimizer);
  if (!c.grid.learning_rate.empty()) grid["learning_rate"] = c.grid.learning_rate;
  if (!c.grid.momentum.empty()) grid["momentum"] = c.grid.momentum;
  if (!c.grid.batch_size.empty()) grid["batch_size"] = c.grid.batch_size;
  if (!c.grid.eigen_epsilon.empty()) grid["eigen_epsilon"] = c.grid.eigen_epsilon;
  if (!c.grid.rmsprop_decay.empty()) grid["rmsprop_decay"] = c.grid.rmsprop_decay;
  if (!c.grid.rmsprop_damping.empty()) grid["rmsprop_damping"] = c.grid.rmsprop_damping;
  doc["grid"] = grid;
  return doc;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return Json::parse(text.str());
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

ExperimentConfig resolve_config(const std::optional<std::string>& preset_name,
                                const std::optional<std::filesystem::path>& config_path,
                                std::optional<std::uint64_t> seed,
                                const std::optional<std::string>& out_dir) {
  if (!preset_name && !config_path) throw ValidationError("one of --preset or --config is required");
  Json doc = preset_name ? preset(*preset_name) : Json::object();
  if (config_path) doc.merge_patch(read_json_file(*config_path));
  if (seed) doc["seed"] = *seed;
  if (out_dir) doc["output_dir"] = *out_dir;
  return parse_config(doc);
}

}  // namespace prong::cli
