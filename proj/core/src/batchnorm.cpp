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

#include "prong/batchnorm.hpp"

#include <cmath>
#include <string>

#include "prong/errors.hpp"

namespace prong {

BatchNormParams BatchNormParams::init(const NetworkSpec& spec) {
  BatchNormParams bn;
  for (std::size_t i = 0; i + 1 < spec.depth(); ++i) {
    const auto n = static_cast<Eigen::Index>(spec.layers[i].out_dim);
    bn.layers.push_back({Vector::Ones(n), Vector::Zero(n), Vector::Zero(n), Vector::Ones(n)});
  }
  return bn;
}

namespace {

void check_bn(const NetworkSpec& spec, const BatchNormParams& bn) {
  if (bn.layers.size() + 1 != spec.depth()) {
    throw DimensionError("batch norm: expected " + std::to_string(spec.depth() - 1) +
                         " normalized layers, got " + std::to_string(bn.layers.size()));
  }
  for (std::size_t i = 0; i < bn.layers.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(spec.layers[i].out_dim);
    const auto& l = bn.layers[i];
    if (l.gain.size() != n || l.shift.size() != n || l.running_mean.size() != n ||
        l.running_var.size() != n) {
      throw DimensionError("batch norm: layer " + std::to_string(i) + " has wrong width");
    }
  }
}

}  // namespace

BatchNormTrace forward_batchnorm(const CanonicalParams& theta, const BatchNormParams& bn,
                                 const NetworkSpec& spec, const Matrix& x, BatchNormMode mode) {
  check_shapes(spec, theta.layers);
  check_bn(spec, bn);
  if (x.cols() != static_cast<Eigen::Index>(spec.input_dim())) {
    throw DimensionError("forward_batchnorm: input has " + std::to_string(x.cols()) +
                         " features, network expects " + std::to_string(spec.input_dim()));
  }
  if (mode == BatchNormMode::training && x.rows() < 2) {
    throw InsufficientBatchError("batch normalization needs a batch of at least 2 examples");
  }
  const std::size_t depth = spec.depth();
  const double batch = static_cast<double>(x.rows());
  BatchNormTrace t;
  t.mode = mode;
  t.base.kind = Parametrization::canonical;
  t.base.input = x;
  for (std::size_t i = 0; i < depth; ++i) {
    const Matrix& h = i == 0 ? t.base.input : t.base.post[i - 1];
    t.base.layer_inputs.push_back(h);
    Matrix z = h * theta.layers[i].weight.transpose();
    z.rowwise() += theta.layers[i].bias.transpose();
    Matrix y;
    if (i + 1 < depth) {
      const BatchNormLayer& l = bn.layers[i];
      Vector mean, var;
      if (mode == BatchNormMode::training) {
        mean = z.colwise().sum().transpose() / batch;
        var = (z.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() / batch;
      } else {
        mean = l.running_mean;
        var = l.running_var;
      }
      Vector sd(var.size());
      std::vector<bool> floored(static_cast<std::size_t>(var.size()));
      for (Eigen::Index k = 0; k < var.size(); ++k) {
        const double s = std::sqrt(std::max(var(k), 0.0));
        floored[static_cast<std::size_t>(k)] = s < kBatchNormStdFloor;
        sd(k) = std::max(s, kBatchNormStdFloor);
      }
      Matrix norm = (z.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
      y = (norm.array().rowwise() * l.gain.transpose().array()).matrix();
      y.rowwise() += l.shift.transpose();
      t.raw.push_back(std::move(z));
      t.normalized.push_back(std::move(norm));
      t.mean.push_back(std::move(mean));
      t.stddev.push_back(std::move(sd));
      t.floored.push_back(std::move(floored));
    } else {
      y = std::move(z);
    }
    Matrix out = activate(spec.layers[i].activation, y);
    if (!y.allFinite() || !out.allFinite()) {
      throw NumericError("forward_batchnorm: non-finite activation in layer " + std::to_string(i));
    }
    t.base.pre.push_back(std::move(y));
    t.base.post.push_back(std::move(out));
  }
  return t;
}

BatchNormGrads backward_batchnorm(const BatchNormTrace& trace, const CanonicalParams& theta,
                                  const BatchNormParams& bn, const NetworkSpec& spec,
                                  const Matrix& output_delta) {
  check_shapes(spec, theta.layers);
  check_bn(spec, bn);
  const std::size_t depth = spec.depth();
  if (trace.base.pre.size() != depth || trace.normalized.size() + 1 != depth) {
    throw ConsistencyError("backward_batchnorm: trace does not match the network");
  }
  if (trace.mode != BatchNormMode::training) {
    throw ConsistencyError("backward_batchnorm: trace was produced in inference mode");
  }
  BatchNormGrads g;
  g.base.delta.resize(depth);
  g.base.grads.resize(depth);
  g.gain.resize(depth - 1);
  g.shift.resize(depth - 1);

  // dz for the output layer; for hidden layers dLoss/dy is turned into
  // dLoss/dz through the normalization before computing weight gradients.
  Matrix dz = output_delta;
  for (std::size_t i = depth; i-- > 0;) {
    g.base.delta[i] = dz;
    g.base.grads[i].weight = dz.transpose() * trace.base.layer_inputs[i];
    g.base.grads[i].bias = dz.colwise().sum().transpose();
    if (i == 0) break;
    const std::size_t j = i - 1;
    const Matrix grad_post = dz * theta.layers[i].weight;
    const Matrix dy = activation_backward(grad_post, spec.layers[j].activation, trace.base.pre[j],
                                          trace.base.post[j]);
    const Matrix& norm = trace.normalized[j];
    g.gain[j] = (dy.array() * norm.array()).colwise().sum().transpose();
    g.shift[j] = dy.colwise().sum().transpose();
    const Matrix dnorm = (dy.array().rowwise() * bn.layers[j].gain.transpose().array()).matrix();
    const double batch = static_cast<double>(dy.rows());
    Matrix dzj(dy.rows(), dy.cols());
    for (Eigen::Index k = 0; k < dy.cols(); ++k) {
      const double mean_d = dnorm.col(k).sum() / batch;
      const double sd = trace.stddev[j](k);
      if (trace.floored[j][static_cast<std::size_t>(k)]) {
        dzj.col(k) = (dnorm.col(k).array() - mean_d) / sd;
      } else {
        const double mean_dn = dnorm.col(k).dot(norm.col(k)) / batch;
        dzj.col(k) = (dnorm.col(k).array() - mean_d - norm.col(k).array() * mean_dn) / sd;
      }
    }
    dz = std::move(dzj);
  }
  return g;
}

void update_running_stats(BatchNormParams& bn, const BatchNormTrace& trace, double momentum) {
  if (trace.mode != BatchNormMode::training) return;
  for (std::size_t i = 0; i < bn.layers.size(); ++i) {
    const Vector var = trace.stddev[i].array().square();
    bn.layers[i].running_mean = momentum * bn.layers[i].running_mean + (1.0 - momentum) * trace.mean[i];
    bn.layers[i].running_var = momentum * bn.layers[i].running_var + (1.0 - momentum) * var;
  }
}

}  // namespace prong
