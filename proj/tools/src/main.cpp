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

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "config.hpp"
#include "csv.hpp"

namespace {

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON config file (merged over --preset)");
  cmd->add_option("--preset", flags.preset, "Built-in preset name (see `prong presets`)");
  cmd->add_option("--seed", flags.seed, "Override the run seed");
  cmd->add_option("--out", flags.out, "Override the output directory");
}

prong::cli::ExperimentConfig resolve(const CommonFlags& flags) {
  std::optional<std::filesystem::path> path;
  if (flags.config) path = *flags.config;
  return prong::cli::resolve_config(flags.preset, path, flags.seed, flags.out);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace prong::cli;
  CLI::App app{"prong: whitened neural networks, projected natural gradient and Fisher diagnostics"};
  app.require_subcommand(1);

  CommonFlags train_flags, fisher_flags, grid_flags;
  auto* train = app.add_subcommand("train", "Train one model and write a run directory");
  add_common(train, train_flags);
  auto* diagnose = app.add_subcommand("diagnose-fisher", "Fisher conditioning during training");
  add_common(diagnose, fisher_flags);
  auto* grid = app.add_subcommand("grid", "Hyper-parameter grid search");
  add_common(grid, grid_flags);

  std::vector<std::string> replay_files;
  std::optional<std::string> replay_out;
  auto* replay = app.add_subcommand("replay", "Align metrics.csv files for plotting");
  replay->add_option("files", replay_files, "metrics.csv files")->required();
  replay->add_option("--out", replay_out, "Directory for the aligned tables");

  auto* presets = app.add_subcommand("presets", "List built-in presets");
  auto* show = app.add_subcommand("show", "Print a resolved config");
  CommonFlags show_flags;
  add_common(show, show_flags);
  auto* schema = app.add_subcommand("schema", "Print the config JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(resolve(train_flags), std::cout);
    if (diagnose->parsed()) return cmd_diagnose_fisher(resolve(fisher_flags), std::cout);
    if (grid->parsed()) return cmd_grid(resolve(grid_flags), std::cout);
    if (replay->parsed()) {
      std::vector<std::filesystem::path> files(replay_files.begin(), replay_files.end());
      std::optional<std::filesystem::path> out;
      if (replay_out) out = *replay_out;
      return cmd_replay(files, out, std::cout);
    }
    if (presets->parsed()) {
      for (const auto& name : preset_names()) std::cout << name << '\n';
      return kExitOk;
    }
    if (show->parsed()) {
      std::cout << to_json(resolve(show_flags)).dump(2) << '\n';
      return kExitOk;
    }
    if (schema->parsed()) {
      std::cout << config_schema().dump(2) << '\n';
      return kExitOk;
    }
  } catch (const SchemaError& e) {
    std::cerr << "error: invalid config\n";
    for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
    return kExitUsage;
  } catch (const prong::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
