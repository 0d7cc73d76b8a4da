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

#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "experiment.hpp"
#include "prong/fisher.hpp"
#include "prong/prong.hpp"

namespace prong::cli {

namespace {

template <typename T>
std::vector<T> axis_or(const std::vector<T>& axis, T base) {
  return axis.empty() ? std::vector<T>{base} : axis;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

double final_loss(const TrainResult& r) {
  return r.rows.empty() ? std::numeric_limits<double>::quiet_NaN() : r.rows.back().train_loss;
}

double best_loss(const TrainResult& r) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : r.rows) {
    if (std::isfinite(row.train_loss) && row.train_loss < best) best = row.train_loss;
  }
  return best;
}

std::vector<std::size_t> fisher_layers(const ExperimentConfig& config, const NetworkSpec& spec) {
  std::vector<std::size_t> layers = config.fisher.layers;
  if (layers.empty()) {
    for (std::size_t i = 0; i < spec.depth(); ++i) {
      if (spec.layers[i].in_dim * spec.layers[i].out_dim <= fisher::kMaxBlockDim) layers.push_back(i);
    }
  }
  for (std::size_t layer : layers) {
    if (layer >= spec.depth()) {
      throw ValidationError("fisher.layers entry " + std::to_string(layer) + " exceeds depth " +
                            std::to_string(spec.depth()));
    }
    const std::size_t side = spec.layers[layer].in_dim * spec.layers[layer].out_dim;
    if (side > fisher::kMaxBlockDim) {
      throw TooLargeError("Fisher block of layer " + std::to_string(layer) + " has side " +
                          std::to_string(side) + " > " + std::to_string(fisher::kMaxBlockDim));
    }
  }
  if (layers.empty()) throw TooLargeError("no layer has a Fisher block within the size guard");
  return layers;
}

fisher::FisherBlock heatmap_block(const ModelView& model, const Matrix& inputs, std::size_t layer,
                                  fisher::BlockKind kind) {
  if (kind == fisher::BlockKind::exact) return fisher::exact_fisher_block(model, inputs, layer);
  return fisher::factorized_fisher_block(model, inputs, layer).second;
}

}  // namespace

int cmd_train(const ExperimentConfig& config, std::ostream& log) {
  const PreparedData data = prepare_data(config.data);
  log << "train: " << config.experiment << " optimizer=" << to_string(config.optimizer)
      << " data=" << data.source << " rows=" << data.train.size()
      << " updates=" << config.train.max_updates << '\n';
  const TrainResult result = run_experiment(config, data);
  write_run_directory(config.output_dir, config, data, result, "train");
  log << "final train loss " << format_real(final_loss(result)) << " after " << result.updates
      << " updates; wrote " << config.output_dir << '\n';
  if (result.reparametrizations > 0) {
    log << "whitening time " << format_real(result.whitening_seconds) << " s of "
        << format_real(result.total_seconds) << " s\n";
  }
  if (result.diverged) {
    log << "diverged: " << result.diagnostic << '\n';
    return kExitDiverged;
  }
  return kExitOk;
}

int cmd_diagnose_fisher(const ExperimentConfig& config, std::ostream& log) {
  const NetworkSpec spec = config.model.spec();
  const std::vector<std::size_t> layers = fisher_layers(config, spec);
  const std::size_t heat_layer = config.fisher.heatmap_layer.value_or(spec.depth() / 2);
  if (heat_layer >= spec.depth()) throw ValidationError("fisher.heatmap_layer exceeds depth");
  if (spec.layers[heat_layer].in_dim * spec.layers[heat_layer].out_dim > fisher::kMaxBlockDim) {
    throw TooLargeError("heatmap block of layer " + std::to_string(heat_layer) +
                        " exceeds the size guard");
  }

  const PreparedData data = prepare_data(config.data);
  const Task task = make_task(config, data);
  std::vector<std::size_t> first(std::min(config.fisher.samples, data.train.size()));
  for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
  const Matrix inputs = gather_rows(data.train.inputs, first);

  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);

  // Reference conditioning: the untrained network, before any whitening.
  const ModelView init_view = view(task.spec, task.init);
  const auto baseline =
      fisher::conditioning_report(init_view, inputs, layers, config.fisher.kinds, 0, nullptr);

  {
    WhitenedModel whitened = WhitenedModel::from_canonical(task.spec, task.init);
    prong_reparametrize(whitened, inputs, config.train.eigen_epsilon);
    auto before = open_out(dir / "heatmap_before.csv");
    write_matrix_csv(before, heatmap_block(init_view, inputs, heat_layer, config.fisher.heatmap_kind).matrix());
    auto after = open_out(dir / "heatmap_after.csv");
    write_matrix_csv(after, heatmap_block(whitened.view(), inputs, heat_layer, config.fisher.heatmap_kind).matrix());
  }

  Json summary;
  summary["layers"] = layers;
  summary["heatmap_layer"] = heat_layer;
  summary["samples"] = inputs.rows();
  int status = kExitOk;
  for (OptimizerKind kind : config.fisher.optimizers) {
    const std::string name(to_string(kind));
    fisher::ConditioningTracker tracker(layers, config.fisher.kinds);
    tracker.set_baseline(baseline);
    TrainCallbacks callbacks;
    callbacks.diagnose = [&](const ModelView& model, std::size_t step) -> std::optional<double> {
      const auto rows = tracker.measure(model, inputs, step);
      return rows.front().cond_ratio_to_initial;
    };
    log << "diagnose-fisher: training " << name << '\n';
    const TrainResult result =
        train(task, kind, config.train, make_options(config), callbacks);
    {
      auto out = open_out(dir / ("fisher_" + name + ".csv"));
      fisher::write_conditioning_csv(out, tracker.rows());
      auto metrics = open_out(dir / ("metrics_" + name + ".csv"));
      write_metrics_csv(metrics, result.rows);
    }
    Json entry;
    std::size_t events = 0;
    for (const auto& row : result.rows) events += row.reparam_event ? 1 : 0;
    entry["reparam_events"] = events;
    entry["diverged"] = result.diverged;
    entry["final_train_loss"] = format_real(final_loss(result));
    if (!tracker.rows().empty()) {
      entry["first_cond_ratio"] = format_real(tracker.rows().front().cond_ratio_to_initial);
      entry["last_cond_ratio"] = format_real(tracker.rows().back().cond_ratio_to_initial);
    }
    summary["runs"][name] = entry;
    log << "  " << name << ": cond ratio first "
        << (tracker.rows().empty() ? "n/a" : format_real(tracker.rows().front().cond_ratio_to_initial))
        << ", last "
        << (tracker.rows().empty() ? "n/a" : format_real(tracker.rows().back().cond_ratio_to_initial))
        << '\n';
    if (result.diverged) status = kExitDiverged;
  }
  auto out = open_out(dir / "summary.json");
  out << summary.dump(2) << '\n';
  auto snap = open_out(dir / "config.json");
  snap << config_snapshot(config);
  return status;
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& config) {
  const GridAxes& g = config.grid;
  const TrainConfig& t = config.train;
  std::vector<ExperimentConfig> cells;
  for (auto opt : axis_or(g.optimizer, config.optimizer))
    for (double lr : axis_or(g.learning_rate, t.learning_rate))
      for (double m : axis_or(g.momentum, t.momentum))
        for (std::size_t bs : axis_or(g.batch_size, t.batch_size))
          for (double eps : axis_or(g.eigen_epsilon, t.eigen_epsilon))
            for (double decay : axis_or(g.rmsprop_decay, t.rmsprop_decay))
              for (double damping : axis_or(g.rmsprop_damping, t.rmsprop_damping)) {
                ExperimentConfig c = config;
                c.optimizer = opt;
                c.train.learning_rate = lr;
                c.train.momentum = m;
                c.train.batch_size = bs;
                c.train.eigen_epsilon = eps;
                c.train.rmsprop_decay = decay;
                c.train.rmsprop_damping = damping;
                c.grid = GridAxes{};
                char name[32];
                std::snprintf(name, sizeof name, "cell_%03zu", cells.size());
                c.output_dir = (std::filesystem::path(config.output_dir) / name).string();
                c.experiment = config.experiment + "/" + name;
                cells.push_back(std::move(c));
              }
  return cells;
}

int cmd_grid(const ExperimentConfig& config, std::ostream& log) {
  const PreparedData data = prepare_data(config.data);
  const std::vector<ExperimentConfig> cells = expand_grid(config);
  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  auto summary = open_out(dir / "summary.csv");
  summary << "cell,optimizer,learning_rate,momentum,batch_size,eigen_epsilon,rmsprop_decay,"
             "rmsprop_damping,final_train_loss,best_train_loss,diverged,updates\n";

  std::optional<std::size_t> best;
  double best_final = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const ExperimentConfig& c = cells[i];
    log << "grid: cell " << i + 1 << "/" << cells.size() << " " << to_string(c.optimizer)
        << " lr=" << format_real(c.train.learning_rate)
        << " momentum=" << format_real(c.train.momentum) << " batch=" << c.train.batch_size
        << " eps=" << format_real(c.train.eigen_epsilon) << '\n';
    TrainResult result;
    try {
      result = run_experiment(c, data);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.diagnostic = e.what();
    }
    write_run_directory(c.output_dir, c, data, result, "grid");
    const double fin = result.diverged ? std::numeric_limits<double>::quiet_NaN() : final_loss(result);
    summary << i << ',' << to_string(c.optimizer) << ',' << format_real(c.train.learning_rate)
            << ',' << format_real(c.train.momentum) << ',' << c.train.batch_size << ','
            << format_real(c.train.eigen_epsilon) << ',' << format_real(c.train.rmsprop_decay)
            << ',' << format_real(c.train.rmsprop_damping) << ',' << format_real(fin) << ','
            << format_real(best_loss(result)) << ',' << (result.diverged ? 1 : 0) << ','
            << result.updates << '\n';
    summary.flush();
    if (result.diverged) log << "  diverged: " << result.diagnostic << '\n';
    if (!result.diverged && std::isfinite(fin) && fin < best_final) {
      best_final = fin;
      best = i;
    }
  }

  Json best_doc;
  if (best) {
    best_doc["cell"] = *best;
    best_doc["final_train_loss"] = format_real(best_final);
    best_doc["config"] = to_json(cells[*best]);
    log << "grid: best cell " << *best << " final train loss " << format_real(best_final) << '\n';
  } else {
    best_doc["cell"] = nullptr;
    log << "grid: every cell diverged\n";
  }
  auto out = open_out(dir / "best.json");
  out << best_doc.dump(2) << '\n';
  return kExitOk;
}

int cmd_replay(const std::vector<std::filesystem::path>& files,
               const std::optional<std::filesystem::path>& out_dir, std::ostream& log) {
  if (files.empty()) throw ValidationError("replay needs at least one metrics file");
  std::vector<RunSeries> runs;
  std::set<std::string> used;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    RunSeries run;
    run.rows = read_metrics_csv(in, path.string());
    std::string name = path.has_parent_path() && path.parent_path().has_filename()
                           ? path.parent_path().filename().string()
                           : path.stem().string();
    if (name.empty() || name == ".") name = path.stem().string();
    std::string unique = name;
    for (int k = 2; used.count(unique) != 0; ++k) unique = name + "_" + std::to_string(k);
    used.insert(unique);
    run.name = unique;
    runs.push_back(std::move(run));
  }
  const AlignedRuns aligned = align_runs(runs);
  if (!out_dir) {
    write_loss_vs_step(log, aligned);
    return kExitOk;
  }
  std::filesystem::create_directories(*out_dir);
  auto steps = open_out(*out_dir / "loss_vs_step.csv");
  write_loss_vs_step(steps, aligned);
  auto wall = open_out(*out_dir / "loss_vs_wallclock.csv");
  write_loss_vs_wallclock(wall, runs);
  return kExitOk;
}

}  // namespace prong::cli
