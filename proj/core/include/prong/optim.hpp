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

#ifndef PRONG_OPTIM_HPP
#define PRONG_OPTIM_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prong/batchnorm.hpp"
#include "prong/net.hpp"

namespace prong {

// Waterfall learning-rate schedule: divide by `divisor` whenever the best
// validation value of the last `patience` evaluations fails to improve on
// the reference value by more than `min_relative_improvement`.
struct AnnealPolicy {
  bool enabled = false;
  std::size_t eval_interval = 1000;
  std::size_t patience = 4;
  double min_relative_improvement = 0.01;
  double divisor = 10.0;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::size_t batch_size = 128;
  std::size_t reparam_period = 1000;  // T
  std::size_t stat_samples = 100;     // N_s
  double eigen_epsilon = 0.01;
  double rmsprop_decay = 0.99;
  double rmsprop_damping = 0.01;
  AnnealPolicy anneal;
  std::uint64_t seed = 0;
  std::size_t max_updates = 1000;
  bool reset_momentum = true;       // zero velocities after each reparametrization
  double rescale_decay = 0.9;       // running variance decay for PRONG+ rescaling
  double batchnorm_momentum = 0.9;  // running statistics decay for the BN baseline

  // Throws ValidationError naming the first violated constraint.
  void validate() const;
};

// One parameter tensor and its gradient, both flattened.
struct ParamBlock {
  std::span<double> value;
  std::span<const double> grad;
};

// Blocks for weight and bias of every layer, in layer order.
std::vector<ParamBlock> param_blocks(std::vector<AffineParams>& params,
                                     const std::vector<AffineParams>& grads);

struct OptimizerState {
  std::vector<std::vector<double>> velocity;
  std::vector<std::vector<double>> mean_square;
  std::uint64_t step = 0;
  double learning_rate = 0.0;

  explicit OptimizerState(double lr = 0.0) : learning_rate(lr) {}

  // Zeroes momentum buffers (kept allocated).
  void reset_velocity();
};

/// v <- momentum * v + g; p <- p - lr * v. With momentum 0 this is plain SGD.
/// Throws NumericError (and leaves everything untouched) on a non-finite
/// gradient.
void sgd_step(std::span<const ParamBlock> blocks, OptimizerState& state, const TrainConfig& config);

/// s <- decay * s + (1 - decay) g^2; v <- momentum * v + g / (sqrt(s) + damping);
/// p <- p - lr * v.
void rmsprop_step(std::span<const ParamBlock> blocks, OptimizerState& state,
                  const TrainConfig& config);

struct AnnealState {
  double learning_rate = 0.0;
  // Index (into the history) of the evaluation at which the last division
  // happened; that evaluation becomes the new reference.
  std::optional<std::size_t> last_division;
};

/// Applies the waterfall rule after the latest entry of `history` (lower is
/// better) and returns the possibly divided learning rate. At most one
/// division per call; the learning rate never increases.
double waterfall_anneal(std::span<const double> history, const AnnealPolicy& policy,
                        AnnealState& state);

/// One momentum-SGD step of the batch-normalized baseline network: forward
/// with batch statistics, backpropagation through the normalization, update
/// of weights, biases, gains and shifts, then running-statistics update.
/// Returns the batch loss.
double bn_baseline_step(CanonicalParams& theta, BatchNormParams& bn, const NetworkSpec& spec,
                        LossKind loss_kind, const Matrix& inputs, const Matrix& targets,
                        OptimizerState& state, const TrainConfig& config);

}  // namespace prong

#endif  // PRONG_OPTIM_HPP
