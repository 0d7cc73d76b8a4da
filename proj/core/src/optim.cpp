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

#include "prong/optim.hpp"

#include <cmath>
#include <string>

#include "prong/errors.hpp"

namespace prong {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("train config: " + what); };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (reparam_period == 0) fail("reparam_period must be >= 1");
  if (stat_samples < 2) fail("stat_samples must be >= 2");
  if (!(eigen_epsilon >= 0.0) || !std::isfinite(eigen_epsilon)) fail("eigen_epsilon must be >= 0");
  if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) fail("rmsprop_decay must be in (0, 1)");
  if (!(rmsprop_damping > 0.0)) fail("rmsprop_damping must be > 0");
  if (!(rescale_decay >= 0.0 && rescale_decay < 1.0)) fail("rescale_decay must be in [0, 1)");
  if (!(batchnorm_momentum >= 0.0 && batchnorm_momentum < 1.0)) {
    fail("batchnorm_momentum must be in [0, 1)");
  }
  if (!(anneal.divisor > 1.0)) fail("anneal.divisor must be > 1");
  if (anneal.enabled && (anneal.patience == 0 || anneal.eval_interval == 0)) {
    fail("anneal.patience and anneal.eval_interval must be >= 1");
  }
}

std::vector<ParamBlock> param_blocks(std::vector<AffineParams>& params,
                                     const std::vector<AffineParams>& grads) {
  if (params.size() != grads.size()) throw DimensionError("param_blocks: depth mismatch");
  std::vector<ParamBlock> blocks;
  blocks.reserve(2 * params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& g = grads[i];
    if (p.weight.rows() != g.weight.rows() || p.weight.cols() != g.weight.cols() ||
        p.bias.size() != g.bias.size()) {
      throw DimensionError("param_blocks: gradient shape mismatch in layer " + std::to_string(i));
    }
    blocks.push_back({{p.weight.data(), static_cast<std::size_t>(p.weight.size())},
                      {g.weight.data(), static_cast<std::size_t>(g.weight.size())}});
    blocks.push_back({{p.bias.data(), static_cast<std::size_t>(p.bias.size())},
                      {g.bias.data(), static_cast<std::size_t>(g.bias.size())}});
  }
  return blocks;
}

void OptimizerState::reset_velocity() {
  for (auto& v : velocity) std::fill(v.begin(), v.end(), 0.0);
}

namespace {

void check_blocks(std::span<const ParamBlock> blocks) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].value.size() != blocks[b].grad.size()) {
      throw DimensionError("optimizer: block " + std::to_string(b) + " gradient size mismatch");
    }
    for (double g : blocks[b].grad) {
      if (!std::isfinite(g)) {
        throw NumericError("optimizer: non-finite gradient in block " + std::to_string(b) +
                           "; step refused");
      }
    }
  }
}

void ensure_buffers(std::vector<std::vector<double>>& buffers, std::span<const ParamBlock> blocks) {
  if (buffers.size() == blocks.size()) {
    bool same = true;
    for (std::size_t b = 0; b < blocks.size() && same; ++b) {
      same = buffers[b].size() == blocks[b].value.size();
    }
    if (same) return;
    if (!buffers.empty()) throw DimensionError("optimizer: parameter layout changed between steps");
  } else if (!buffers.empty()) {
    throw DimensionError("optimizer: parameter layout changed between steps");
  }
  buffers.clear();
  for (const auto& b : blocks) buffers.emplace_back(b.value.size(), 0.0);
}

}  // namespace

void sgd_step(std::span<const ParamBlock> blocks, OptimizerState& state, const TrainConfig& config) {
  check_blocks(blocks);
  const double lr = state.learning_rate;
  if (config.momentum == 0.0) {
    for (const auto& b : blocks) {
      for (std::size_t k = 0; k < b.value.size(); ++k) b.value[k] -= lr * b.grad[k];
    }
  } else {
    ensure_buffers(state.velocity, blocks);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      auto& v = state.velocity[i];
      const auto& b = blocks[i];
      for (std::size_t k = 0; k < b.value.size(); ++k) {
        v[k] = config.momentum * v[k] + b.grad[k];
        b.value[k] -= lr * v[k];
      }
    }
  }
  ++state.step;
}

void rmsprop_step(std::span<const ParamBlock> blocks, OptimizerState& state,
                  const TrainConfig& config) {
  check_blocks(blocks);
  ensure_buffers(state.mean_square, blocks);
  if (config.momentum != 0.0) ensure_buffers(state.velocity, blocks);
  const double lr = state.learning_rate;
  const double rho = config.rmsprop_decay;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& s = state.mean_square[i];
    const auto& b = blocks[i];
    for (std::size_t k = 0; k < b.value.size(); ++k) {
      const double g = b.grad[k];
      s[k] = rho * s[k] + (1.0 - rho) * g * g;
      const double scaled = g / (std::sqrt(s[k]) + config.rmsprop_damping);
      if (config.momentum != 0.0) {
        auto& v = state.velocity[i][k];
        v = config.momentum * v + scaled;
        b.value[k] -= lr * v;
      } else {
        b.value[k] -= lr * scaled;
      }
    }
  }
  ++state.step;
}

double waterfall_anneal(std::span<const double> history, const AnnealPolicy& policy,
                        AnnealState& state) {
  const std::size_t n = history.size();
  const std::size_t start = state.last_division.value_or(0);
  if (policy.patience == 0 || n < start + policy.patience) return state.learning_rate;

  // The reference is the best value up to and including the evaluation just
  // before the window of the last (patience - 1) evaluations.
  const std::size_t window_begin = n - policy.patience + 1;
  double reference = history[start];
  for (std::size_t i = start; i < window_begin; ++i) reference = std::min(reference, history[i]);
  double recent = history[window_begin - 1];
  for (std::size_t i = window_begin; i < n; ++i) recent = std::min(recent, history[i]);
  recent = std::min(recent, reference);

  double improvement;
  if (reference != 0.0) {
    improvement = (reference - recent) / std::abs(reference);
  } else {
    improvement = recent < reference ? INFINITY : 0.0;
  }
  if (improvement < policy.min_relative_improvement) {
    state.learning_rate /= policy.divisor;
    state.last_division = n - 1;
  }
  return state.learning_rate;
}

double bn_baseline_step(CanonicalParams& theta, BatchNormParams& bn, const NetworkSpec& spec,
                        LossKind loss_kind, const Matrix& inputs, const Matrix& targets,
                        OptimizerState& state, const TrainConfig& config) {
  const BatchNormTrace trace = forward_batchnorm(theta, bn, spec, inputs, BatchNormMode::training);
  const LossResult l = loss(loss_kind, trace.base.output(), targets);
  if (!std::isfinite(l.value)) throw NumericError("bn_baseline_step: non-finite loss");
  const Matrix delta = output_delta(loss_kind, trace.base, spec, targets);
  BatchNormGrads g = backward_batchnorm(trace, theta, bn, spec, delta);

  std::vector<ParamBlock> blocks = param_blocks(theta.layers, g.base.grads);
  for (std::size_t i = 0; i < bn.layers.size(); ++i) {
    auto& layer = bn.layers[i];
    blocks.push_back({{layer.gain.data(), static_cast<std::size_t>(layer.gain.size())},
                      {g.gain[i].data(), static_cast<std::size_t>(g.gain[i].size())}});
    blocks.push_back({{layer.shift.data(), static_cast<std::size_t>(layer.shift.size())},
                      {g.shift[i].data(), static_cast<std::size_t>(g.shift[i].size())}});
  }
  sgd_step(blocks, state, config);
  update_running_stats(bn, trace, config.batchnorm_momentum);
  return l.value;
}

}  // namespace prong
