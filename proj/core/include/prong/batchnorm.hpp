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

#ifndef PRONG_BATCHNORM_HPP
#define PRONG_BATCHNORM_HPP

#include <vector>

#include "prong/net.hpp"

namespace prong {

// Normalization applied to the pre-activation of one hidden layer:
// y = gain * (z - mean) / max(std, 1e-6) + shift, h = f(y).
struct BatchNormLayer {
  Vector gain;
  Vector shift;
  Vector running_mean;
  Vector running_var;
};

// One entry per hidden layer (every layer except the output layer, which
// stays an ordinary affine map).
struct BatchNormParams {
  std::vector<BatchNormLayer> layers;

  // gain = 1, shift = 0, running statistics (0, 1).
  static BatchNormParams init(const NetworkSpec& spec);
};

enum class BatchNormMode { training, inference };

struct BatchNormTrace {
  ForwardTrace base;  // pre[i] holds y_i (the input of f_i)
  std::vector<Matrix> raw;         // z_i = W_i h_{i-1} + b_i
  std::vector<Matrix> normalized;  // (z_i - mean) / std
  std::vector<Vector> mean;
  std::vector<Vector> stddev;      // after flooring
  std::vector<std::vector<bool>> floored;
  BatchNormMode mode = BatchNormMode::training;
};

struct BatchNormGrads {
  BackwardTrace base;
  std::vector<Vector> gain;
  std::vector<Vector> shift;
};

constexpr double kBatchNormStdFloor = 1e-6;

/// Forward pass with batch statistics (training) or running averages
/// (inference). Training mode throws InsufficientBatchError for a batch of 1.
BatchNormTrace forward_batchnorm(const CanonicalParams& theta, const BatchNormParams& bn,
                                 const NetworkSpec& spec, const Matrix& x,
                                 BatchNormMode mode = BatchNormMode::training);

/// Gradients through the normalization, given dLoss/dz_L of the output layer.
BatchNormGrads backward_batchnorm(const BatchNormTrace& trace, const CanonicalParams& theta,
                                  const BatchNormParams& bn, const NetworkSpec& spec,
                                  const Matrix& output_delta);

/// running <- momentum * running + (1 - momentum) * batch statistic.
void update_running_stats(BatchNormParams& bn, const BatchNormTrace& trace, double momentum);

}  // namespace prong

#endif  // PRONG_BATCHNORM_HPP
