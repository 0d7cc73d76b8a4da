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

#include "prong/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "prong/errors.hpp"
#include "prong/random.hpp"

namespace prong {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::momentum: return "momentum";
    case OptimizerKind::rmsprop: return "rmsprop";
    case OptimizerKind::bn: return "bn";
    case OptimizerKind::prong: return "prong";
    case OptimizerKind::prong_plus: return "prong_plus";
  }
  return "?";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  for (OptimizerKind k : {OptimizerKind::sgd, OptimizerKind::momentum, OptimizerKind::rmsprop,
                          OptimizerKind::bn, OptimizerKind::prong, OptimizerKind::prong_plus}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown optimizer '" + std::string(name) + "'");
}

namespace {

constexpr std::size_t kEvalChunk = 2048;

// Stream ids for Rng::derive.
constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kStatStream = 2;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double evaluate_bn_loss(const CanonicalParams& theta, const BatchNormParams& bn,
                        const NetworkSpec& spec, LossKind kind, const Matrix& inputs,
                        const Matrix& targets) {
  double total = 0.0;
  for (Eigen::Index start = 0; start < inputs.rows(); start += kEvalChunk) {
    const Eigen::Index rows = std::min<Eigen::Index>(kEvalChunk, inputs.rows() - start);
    const BatchNormTrace t = forward_batchnorm(theta, bn, spec, inputs.middleRows(start, rows),
                                               BatchNormMode::inference);
    total += loss(kind, t.base.output(), targets.middleRows(start, rows)).value *
             static_cast<double>(rows);
  }
  return total / static_cast<double>(inputs.rows());
}

}  // namespace

double evaluate_loss(const ModelView& model, LossKind kind, const Matrix& inputs,
                     const Matrix& targets) {
  if (inputs.rows() == 0) throw DimensionError("evaluate_loss: empty input");
  double total = 0.0;
  for (Eigen::Index start = 0; start < inputs.rows(); start += kEvalChunk) {
    const Eigen::Index rows = std::min<Eigen::Index>(kEvalChunk, inputs.rows() - start);
    const ForwardTrace t = model.forward(inputs.middleRows(start, rows));
    total += loss(kind, t.output(), targets.middleRows(start, rows)).value *
             static_cast<double>(rows);
  }
  return total / static_cast<double>(inputs.rows());
}

TrainResult train(const Task& task, OptimizerKind kind, const TrainConfig& config,
                  const TrainOptions& options, const TrainCallbacks& callbacks) {
  config.validate();
  task.spec.validate();
  if (task.train == nullptr || task.train->size() == 0) {
    throw ValidationError("train: task has no training data");
  }
  task.train->validate();
  check_shapes(task.spec, task.init.layers);
  if (options.eval_interval == 0) throw ValidationError("train: eval_interval must be >= 1");

  const bool whitened = kind == OptimizerKind::prong || kind == OptimizerKind::prong_plus;
  const bool plus = kind == OptimizerKind::prong_plus;
  TrainConfig step_config = config;
  if (kind == OptimizerKind::sgd) step_config.momentum = 0.0;

  const Dataset& data = *task.train;
  const std::size_t eval_rows = options.train_eval_rows == 0
                                    ? data.size()
                                    : std::min(options.train_eval_rows, data.size());
  const Matrix train_eval_x = data.inputs.topRows(static_cast<Eigen::Index>(eval_rows));
  const Matrix train_eval_y = data.targets.topRows(static_cast<Eigen::Index>(eval_rows));

  TrainResult result;
  result.kind = whitened ? Parametrization::whitened : Parametrization::canonical;

  CanonicalParams theta = task.init;
  WhitenedModel model;
  BatchNormParams bn;
  if (whitened) model = WhitenedModel::from_canonical(task.spec, task.init);
  if (kind == OptimizerKind::bn) bn = BatchNormParams::init(task.spec);

  auto current_view = [&]() -> ModelView {
    return whitened ? model.view() : view(task.spec, theta);
  };
  auto eval_on = [&](const Matrix& x, const Matrix& y) {
    if (kind == OptimizerKind::bn) return evaluate_bn_loss(theta, bn, task.spec, task.loss, x, y);
    return evaluate_loss(current_view(), task.loss, x, y);
  };

  OptimizerState state(config.learning_rate);
  AnnealState anneal{config.learning_rate, std::nullopt};
  std::vector<double> anneal_history;
  RescaleState rescale;
  rescale.decay = config.rescale_decay;
  BatchPlan plan(data.size(), config.batch_size, Rng::derive(config.seed, kBatchStream).next());
  Rng stat_rng = Rng::derive(config.seed, kStatStream);

  const Clock::time_point start = Clock::now();
  std::size_t last_row_step = std::numeric_limits<std::size_t>::max();

  auto emit_row = [&](std::size_t step, bool reparam) {
    MetricsRow row;
    row.step = step;
    row.wallclock_seconds = options.record_wallclock ? seconds_since(start) : 0.0;
    row.train_loss = eval_on(train_eval_x, train_eval_y);
    row.eval_loss = task.eval != nullptr ? eval_on(task.eval->inputs, task.eval->targets)
                                         : std::numeric_limits<double>::quiet_NaN();
    row.learning_rate = state.learning_rate;
    row.reparam_event = reparam;
    if (callbacks.diagnose && kind != OptimizerKind::bn) {
      row.cond_ratio = callbacks.diagnose(current_view(), step);
    }
    result.rows.push_back(row);
    last_row_step = step;
    if (callbacks.on_metrics) callbacks.on_metrics(row);
  };

  auto probe_output = [&]() -> Matrix {
    return options.probe ? model.view().forward(*options.probe).output() : Matrix();
  };
  auto probe_change = [&](const Matrix& before) {
    if (!options.probe) return std::numeric_limits<double>::quiet_NaN();
    return linalg::max_abs(Matrix(probe_output() - before));
  };

  auto abort = [&](std::size_t step, const std::string& why) {
    result.diverged = true;
    result.diagnostic = "diverged at step " + std::to_string(step) + ": " + why;
  };

  try {
    for (std::size_t t = 0; t < config.max_updates; ++t) {
      const bool reparam = whitened && !options.freeze_whitening && t % config.reparam_period == 0;
      if (reparam) {
        const Matrix before = probe_output();
        const std::size_t ns = std::min(config.stat_samples, data.size());
        const std::vector<std::size_t> rows = sample_without_replacement(data.size(), ns, stat_rng);
        const Matrix stats = gather_rows(data.inputs, rows);
        const Clock::time_point t0 = Clock::now();
        const ReparamReport report = prong_reparametrize(model, stats, config.eigen_epsilon);
        if (config.reset_momentum) state.reset_velocity();
        rescale.reset();
        WhiteningEvent ev;
        ev.seconds = seconds_since(t0);
        result.whitening_seconds += ev.seconds;
        ++result.reparametrizations;
        ev.step = t;
        ev.kind = WhiteningEventKind::reparametrize;
        ev.probe_output_change = probe_change(before);
        ev.model = &model;
        ev.stat_samples = &stats;
        ev.report = &report;
        if (callbacks.on_event) callbacks.on_event(ev);
      }
      if (t % options.eval_interval == 0 || reparam) emit_row(t, reparam);

      if (config.anneal.enabled && t > 0 && t % config.anneal.eval_interval == 0) {
        anneal_history.push_back(task.eval != nullptr
                                     ? eval_on(task.eval->inputs, task.eval->targets)
                                     : eval_on(train_eval_x, train_eval_y));
        state.learning_rate = waterfall_anneal(anneal_history, config.anneal, anneal);
      }

      const Batch batch = next_batch(data, plan);
      if (kind == OptimizerKind::bn) {
        if (batch.inputs.rows() < 2) continue;  // a short trailing batch cannot be normalized
        const double l = bn_baseline_step(theta, bn, task.spec, task.loss, batch.inputs,
                                          batch.targets, state, step_config);
        if (!std::isfinite(l)) {
          abort(t, "non-finite training loss");
          break;
        }
        ++result.updates;
        continue;
      }

      const ModelView mv = current_view();
      const ForwardTrace trace = mv.forward(batch.inputs);
      const LossResult l = loss(task.loss, trace.output(), batch.targets);
      result.clamped_outputs += l.clamped;
      if (!std::isfinite(l.value)) {
        abort(t, "non-finite training loss");
        break;
      }
      BackwardTrace grads =
          backward_from_output_delta(trace, mv, output_delta(task.loss, trace, task.spec, batch.targets));
      std::vector<AffineParams>& params = whitened ? model.omega.layers : theta.layers;
      const std::vector<ParamBlock> blocks = param_blocks(params, grads.grads);
      if (kind == OptimizerKind::rmsprop) {
        rmsprop_step(blocks, state, step_config);
      } else {
        sgd_step(blocks, state, step_config);
      }
      ++result.updates;

      if (plus) {
        const Matrix before = probe_output();
        const Clock::time_point t0 = Clock::now();
        const std::vector<Vector> scales = prong_plus_rescale(model, trace, rescale);
        // velocities transform like gradients: columns of layer i divided by D_i
        if (!state.velocity.empty()) {
          for (std::size_t i = 0; i < scales.size(); ++i) {
            auto& v = state.velocity[2 * i];
            const auto cols = static_cast<std::size_t>(scales[i].size());
            for (std::size_t k = 0; k < v.size(); ++k) v[k] /= scales[i](static_cast<Eigen::Index>(k % cols));
          }
        }
        WhiteningEvent ev;
        ev.seconds = seconds_since(t0);
        result.whitening_seconds += ev.seconds;
        ev.step = t + 1;
        ev.kind = WhiteningEventKind::rescale;
        ev.probe_output_change = probe_change(before);
        ev.model = &model;
        if (callbacks.on_event) callbacks.on_event(ev);
      }
    }
  } catch (const NumericError& e) {
    abort(result.updates, e.what());
  }

  if (!result.diverged && last_row_step != result.updates) {
    try {
      emit_row(result.updates, false);
    } catch (const NumericError& e) {
      abort(result.updates, e.what());
    }
  }

  result.total_seconds = seconds_since(start);
  if (whitened) {
    result.canonical = model.canonical();
    result.whitened = model;
  } else {
    result.canonical = theta;
  }
  if (kind == OptimizerKind::bn) result.batchnorm = bn;
  return result;
}

TrainResult prong_train(const Task& task, const TrainConfig& config, bool plus,
                        const TrainOptions& options, const TrainCallbacks& callbacks) {
  return train(task, plus ? OptimizerKind::prong_plus : OptimizerKind::prong, config, options,
               callbacks);
}

}  // namespace prong
