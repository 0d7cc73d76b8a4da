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

#ifndef PRONG_CLI_COMMANDS_HPP
#define PRONG_CLI_COMMANDS_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "config.hpp"

namespace prong::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // bad flags or invalid config
inline constexpr int kExitDiverged = 2;
inline constexpr int kExitFailure = 3;  // data, format or numeric failure

/// Trains one model and writes a self-describing run directory.
int cmd_train(const ExperimentConfig& config, std::ostream& log);

/// Trains each of config.fisher.optimizers while tracking Fisher block
/// conditioning relative to the untrained network, and dumps the heatmap
/// block before and after the first whitening.
int cmd_diagnose_fisher(const ExperimentConfig& config, std::ostream& log);

/// Runs every cell of config.grid and writes summary.csv and best.json.
int cmd_grid(const ExperimentConfig& config, std::ostream& log);

/// Aligns metrics files on a common step grid. Writes loss_vs_step.csv and
/// loss_vs_wallclock.csv into `out_dir`, or the step table to `log` when no
/// directory is given.
int cmd_replay(const std::vector<std::filesystem::path>& files,
               const std::optional<std::filesystem::path>& out_dir, std::ostream& log);

/// Every cell of the grid, in row-major order over the axes
/// optimizer, learning_rate, momentum, batch_size, eigen_epsilon,
/// rmsprop_decay, rmsprop_damping.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config);

}  // namespace prong::cli

#endif  // PRONG_CLI_COMMANDS_HPP
