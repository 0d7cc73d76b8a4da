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

#ifndef PRONG_CLI_EXPERIMENT_HPP
#define PRONG_CLI_EXPERIMENT_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "config.hpp"
#include "prong/data.hpp"
#include "prong/trainer.hpp"

namespace prong::cli {

struct PreparedData {
  Dataset train;
  std::optional<Dataset> eval;
  std::string source;  // what was actually loaded, e.g. "synthetic_digits"
};

/// Loads or synthesizes the dataset described by `config`, shapes its
/// targets for the task and splits off the validation rows.
PreparedData prepare_data(const DataConfig& config);

/// Throws ValidationError when the model does not fit the data.
Task make_task(const ExperimentConfig& config, const PreparedData& data);
TrainOptions make_options(const ExperimentConfig& config);

/// Runs the configured optimizer on prepared data.
TrainResult run_experiment(const ExperimentConfig& config, const PreparedData& data,
                           const TrainCallbacks& callbacks = {});

/// Git-style content hash: SHA-1 of "blob <size>\0<text>", lowercase hex.
std::string content_hash(std::string_view text);

/// Pretty-printed config snapshot as written to config.json.
std::string config_snapshot(const ExperimentConfig& config);

/// Writes metrics.csv, config.json, checkpoint.bin and manifest.json.
void write_run_directory(const std::filesystem::path& dir, const ExperimentConfig& config,
                         const PreparedData& data, const TrainResult& result,
                         std::string_view command);

}  // namespace prong::cli

#endif  // PRONG_CLI_EXPERIMENT_HPP
