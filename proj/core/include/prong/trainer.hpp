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

#ifndef PRONG_TRAINER_HPP
#define PRONG_TRAINER_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prong/batchnorm.hpp"
#include "prong/data.hpp"
#include "prong/net.hpp"
#include "prong/optim.hpp"
#include "prong/prong.hpp"

namespace prong {

enum class OptimizerKind { sgd, momentum, rmsprop, bn, prong, prong_plus };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

struct Task {
  NetworkSpec spec;
  LossKind loss = LossKind::squared_error;
  const Dataset* train = nullptr;
  const Dataset* eval = nullptr;  // optional held-out set
  CanonicalParams init;
};

struct TrainOptions {
  std::size_t eval_interval = 100;
  // Rows of the training set used for train_loss; 0 means all of them.
  std::size_t train_eval_rows = 0;
  // PRONG only: keep U = I, c = 0 forever (no reparametrization at all).
  bool freeze_whitening = false;
  // Inputs whose outputs are compared before and after every whitening
  // event; the max-abs change is reported through on_event.
  std::optional<Matrix> probe;
  bool record_wallclock = true;
};

struct MetricsRow {
  std::size_t step = 0;
  double wallclock_seconds = 0.0;
  double train_loss = 0.0;
  double eval_loss = 0.0;  // NaN without an eval set
  double learning_rate = 0.0;
  std::optional<double> cond_ratio;
  bool reparam_event = false;
};

enum class WhiteningEventKind { reparametrize, rescale };

struct WhiteningEvent {
  std::size_t step = 0;
  WhiteningEventKind kind = WhiteningEventKind::reparametrize;
  double seconds = 0.0;
  double probe_output_change = 0.0;  // NaN without a probe
  const WhitenedModel* model = nullptr;
  const Matrix* stat_samples = nullptr;  // reparametrize events only
  const ReparamReport* report = nullptr;  // reparametrize events only
};

struct TrainCallbacks {
  std::function<void(const MetricsRow&)> on_metrics;
  std::function<void(const WhiteningEvent&)> on_event;
  // Called at each metrics row with the current model (canonical or
  // whitened view); its result is stored as the row's cond_ratio.
  std::function<std::optional<double>(const ModelView&, std::size_t step)> diagnose;
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  bool diverged = false;
  std::string diagnostic;
  std::size_t updates = 0;
  Parametrization kind = Parametrization::canonical;
  CanonicalParams canonical;             // final canonical parameters
  std::optional<WhitenedModel> whitened;  // PRONG runs
  std::optional<BatchNormParams> batchnorm;  // BN runs
  double total_seconds = 0.0;
  double whitening_seconds = 0.0;  // reparametrization + rescaling
  std::size_t reparametrizations = 0;
  std::size_t clamped_outputs = 0;
};

/// Runs `config.max_updates` minibatch updates with the chosen optimizer.
///
/// For prong / prong_plus this is the amortized reparametrization loop:
/// at every step t with t mod T == 0 (t = 0 included) the whitening is
/// re-estimated from N_s training rows drawn without replacement, momentum
/// is optionally reset, and momentum-SGD runs on Omega in between. A metrics
/// row is emitted at step 0, every eval_interval steps, at every
/// reparametrization step and after the last update. A non-finite training
/// loss aborts the run with `diverged` set.
TrainResult train(const Task& task, OptimizerKind kind, const TrainConfig& config,
                  const TrainOptions& options = {}, const TrainCallbacks& callbacks = {});

/// train() with OptimizerKind::prong or prong_plus.
TrainResult prong_train(const Task& task, const TrainConfig& config, bool plus = false,
                        const TrainOptions& options = {}, const TrainCallbacks& callbacks = {});

/// Mean loss over all rows, evaluated in chunks.
double evaluate_loss(const ModelView& model, LossKind kind, const Matrix& inputs,
                     const Matrix& targets);

}  // namespace prong

#endif  // PRONG_TRAINER_HPP
