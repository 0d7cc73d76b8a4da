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

#ifndef PRONG_CLI_CONFIG_HPP
#define PRONG_CLI_CONFIG_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prong/errors.hpp"
#include "prong/fisher.hpp"
#include "prong/net.hpp"
#include "prong/optim.hpp"
#include "prong/trainer.hpp"

namespace prong::cli {

using Json = nlohmann::json;

// Raised for a config that fails schema validation. `problems()` lists one
// entry per offending key, as "<json pointer>: <reason>".
class SchemaError : public ValidationError {
 public:
  explicit SchemaError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class DataSource { automatic, mnist, synthetic_digits, synthetic_gaussian };
enum class DataTask { autoencoder, classification, binary };

struct DataConfig {
  DataSource source = DataSource::automatic;
  std::string train_images;
  std::string train_labels;
  std::size_t count = 12000;  // 0 = every row of the IDX file
  std::size_t validation = 2000;
  bool downsample = true;
  DataTask task = DataTask::autoencoder;
  std::size_t gaussian_dim = 100;
  double gaussian_decay = 0.9;
  std::uint64_t seed = 7;
};

struct ModelConfig {
  std::vector<std::size_t> widths;
  Activation activation = Activation::sigmoid;
  Activation head = Activation::sigmoid;
  LossKind loss = LossKind::squared_error;
  std::uint64_t init_seed = 3;

  NetworkSpec spec() const;
};

struct EvalConfig {
  std::size_t interval = 100;
  std::size_t train_rows = 0;
  bool record_wallclock = true;
};

struct FisherConfig {
  std::vector<std::size_t> layers;  // empty: every layer that fits the size guard
  std::vector<fisher::BlockKind> kinds{fisher::BlockKind::factorized};
  std::size_t samples = 500;
  std::vector<OptimizerKind> optimizers{OptimizerKind::sgd, OptimizerKind::rmsprop,
                                        OptimizerKind::prong};
  std::optional<std::size_t> heatmap_layer;  // default: the middle layer
  fisher::BlockKind heatmap_kind = fisher::BlockKind::factorized;
};

// Axes of a hyper-parameter grid. Empty axes take the base config value.
struct GridAxes {
  std::vector<OptimizerKind> optimizer;
  std::vector<double> learning_rate;
  std::vector<double> momentum;
  std::vector<std::size_t> batch_size;
  std::vector<double> eigen_epsilon;
  std::vector<double> rmsprop_decay;
  std::vector<double> rmsprop_damping;

  std::size_t cell_count() const;
};

struct ExperimentConfig {
  std::string experiment = "run";
  std::uint64_t seed = 0;
  std::string output_dir = "runs/run";
  OptimizerKind optimizer = OptimizerKind::prong;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  bool freeze_whitening = false;
  EvalConfig eval;
  FisherConfig fisher;
  GridAxes grid;
};

/// The published JSON schema every config is checked against.
const Json& config_schema();

/// Names of the built-in presets, sorted.
std::vector<std::string> preset_names();

/// The JSON text of a built-in preset. Throws ValidationError for an
/// unknown name.
Json preset(std::string_view name);

/// Returns the list of schema violations (empty when valid). Each entry is
/// "<json pointer>: <reason>"; unknown keys are reported individually.
std::vector<std::string> schema_problems(const Json& doc);

/// Validates `doc` and converts it, filling unspecified fields with defaults.
/// Throws SchemaError listing every offending key.
ExperimentConfig parse_config(const Json& doc);

/// Full config with every field spelled out; parse_config(to_json(c)) == c.
Json to_json(const ExperimentConfig& config);

/// Reads a JSON file, reporting syntax errors with their byte offset.
Json read_json_file(const std::filesystem::path& path);

/// Resolves --preset / --config / --seed / --out into one validated config.
/// A config file given together with a preset is merged over it (RFC 7386).
ExperimentConfig resolve_config(const std::optional<std::string>& preset_name,
                                const std::optional<std::filesystem::path>& config_path,
                                std::optional<std::uint64_t> seed,
                                const std::optional<std::string>& out_dir);

std::string_view to_string(DataSource source);
std::string_view to_string(DataTask task);

}  // namespace prong::cli

#endif  // PRONG_CLI_CONFIG_HPP
