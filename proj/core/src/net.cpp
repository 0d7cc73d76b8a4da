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

#include "prong/net.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prong/errors.hpp"
#include "prong/random.hpp"

namespace prong {

namespace {

constexpr double kClampLow = 1e-12;
constexpr double kClampHigh = 1.0 - 1e-12;

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Activation f) {
  switch (f) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  for (Activation f : {Activation::sigmoid, Activation::tanh, Activation::relu,
                       Activation::softmax, Activation::identity}) {
    if (to_string(f) == name) return f;
  }
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Parametrization kind) {
  return kind == Parametrization::canonical ? "canonical" : "whitened";
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::squared_error: return "squared_error";
    case LossKind::binary_cross_entropy: return "binary_cross_entropy";
    case LossKind::categorical_cross_entropy: return "categorical_cross_entropy";
  }
  return "?";
}

LossKind loss_from_string(std::string_view name) {
  for (LossKind k : {LossKind::squared_error, LossKind::binary_cross_entropy,
                     LossKind::categorical_cross_entropy}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown loss '" + std::string(name) + "'");
}

NetworkSpec NetworkSpec::chain(const std::vector<std::size_t>& widths,
                               const std::vector<Activation>& activations) {
  if (widths.size() < 2 || activations.size() != widths.size() - 1) {
    throw ValidationError("NetworkSpec::chain: need L+1 widths and L activations");
  }
  NetworkSpec spec;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    spec.layers.push_back({widths[i], widths[i + 1], activations[i]});
  }
  spec.validate();
  return spec;
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw ValidationError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in_dim == 0 || l.out_dim == 0) {
      throw ValidationError("layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && l.in_dim != layers[i - 1].out_dim) {
      throw ValidationError("layer " + std::to_string(i) + " expects " +
                            std::to_string(l.in_dim) + " inputs but layer " +
                            std::to_string(i - 1) + " produces " +
                            std::to_string(layers[i - 1].out_dim));
    }
    if (l.activation == Activation::softmax && i + 1 != layers.size()) {
      throw ValidationError("softmax is only allowed on the last layer");
    }
  }
}

WhiteningCoeffs WhiteningCoeffs::identity(const NetworkSpec& spec) {
  WhiteningCoeffs phi;
  for (const auto& l : spec.layers) {
    const auto n = static_cast<Eigen::Index>(l.in_dim);
    phi.layers.push_back({Matrix::Identity(n, n), Vector::Zero(n)});
  }
  return phi;
}

void check_shapes(const NetworkSpec& spec, const std::vector<AffineParams>& layers) {
  if (layers.size() != spec.depth()) {
    throw DimensionError("expected " + std::to_string(spec.depth()) + " layers of parameters, got " +
                         std::to_string(layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& p = layers[i];
    if (p.weight.rows() != static_cast<Eigen::Index>(l.out_dim) ||
        p.weight.cols() != static_cast<Eigen::Index>(l.in_dim) ||
        p.bias.size() != static_cast<Eigen::Index>(l.out_dim)) {
      throw DimensionError("layer " + std::to_string(i) + ": weight " + shape(p.weight) +
                           " / bias " + std::to_string(p.bias.size()) + " do not match " +
                           std::to_string(l.out_dim) + "x" + std::to_string(l.in_dim));
    }
  }
}

void check_shapes(const NetworkSpec& spec, const WhiteningCoeffs& phi) {
  if (phi.layers.size() != spec.depth()) {
    throw DimensionError("expected " + std::to_string(spec.depth()) +
                         " whitening entries, got " + std::to_string(phi.layers.size()));
  }
  for (std::size_t i = 0; i < phi.layers.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(spec.layers[i].in_dim);
    const auto& w = phi.layers[i];
    if (w.u.rows() != n || w.u.cols() != n || w.c.size() != n) {
      throw DimensionError("whitening entry " + std::to_string(i) + ": U " + shape(w.u) +
                           ", c " + std::to_string(w.c.size()) + ", expected dimension " +
                           std::to_string(n));
    }
  }
}

Matrix activate(Activation f, const Matrix& pre) {
  switch (f) {
    case Activation::sigmoid: return pre.unaryExpr([](double z) { return sigmoid(z); });
    case Activation::tanh: return pre.array().tanh().matrix();
    case Activation::relu: return pre.cwiseMax(0.0);
    case Activation::identity: return pre;
    case Activation::softmax: {
      Matrix out(pre.rows(), pre.cols());
      for (Eigen::Index r = 0; r < pre.rows(); ++r) {
        const double top = pre.row(r).maxCoeff();
        out.row(r) = (pre.row(r).array() - top).exp().matrix();
        out.row(r) /= out.row(r).sum();
      }
      return out;
    }
  }
  return pre;
}

Matrix activation_backward(const Matrix& grad_post, Activation f, const Matrix& pre,
                           const Matrix& post) {
  switch (f) {
    case Activation::sigmoid:
      return (grad_post.array() * post.array() * (1.0 - post.array())).matrix();
    case Activation::tanh:
      return (grad_post.array() * (1.0 - post.array().square())).matrix();
    case Activation::relu:
      return (grad_post.array() * (pre.array() > 0.0).cast<double>()).matrix();
    case Activation::identity: return grad_post;
    case Activation::softmax: {
      // J^T g = h .* (g - <g, h>) row by row
      const Vector inner = (grad_post.array() * post.array()).rowwise().sum();
      return (post.array() * (grad_post.colwise() - inner).array()).matrix();
    }
  }
  return grad_post;
}

ModelView view(const NetworkSpec& spec, const CanonicalParams& theta) {
  return ModelView{spec, theta.layers, nullptr};
}

ModelView view(const NetworkSpec& spec, const WhitenedParams& omega, const WhiteningCoeffs& phi) {
  return ModelView{spec, omega.layers, &phi};
}

ForwardTrace ModelView::forward(const Matrix& x) const {
  check_shapes(spec, layers);
  if (whitening != nullptr) check_shapes(spec, *whitening);
  if (x.cols() != static_cast<Eigen::Index>(spec.input_dim())) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " features, network expects " + std::to_string(spec.input_dim()));
  }
  const std::size_t depth = spec.depth();
  ForwardTrace trace;
  trace.kind = kind();
  trace.input = x;
  trace.layer_inputs.reserve(depth);
  trace.pre.reserve(depth);
  trace.post.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    const Matrix& h = i == 0 ? trace.input : trace.post[i - 1];
    if (whitening != nullptr) {
      const Whitening& w = whitening->layers[i];
      trace.layer_inputs.push_back((h.rowwise() - w.c.transpose()) * w.u.transpose());
    } else {
      trace.layer_inputs.push_back(h);
    }
    Matrix z = trace.layer_inputs.back() * layers[i].weight.transpose();
    z.rowwise() += layers[i].bias.transpose();
    Matrix out = activate(spec.layers[i].activation, z);
    if (!z.allFinite() || !out.allFinite()) {
      throw NumericError("forward: non-finite activation in layer " + std::to_string(i));
    }
    trace.pre.push_back(std::move(z));
    trace.post.push_back(std::move(out));
  }
  return trace;
}

ForwardTrace forward_canonical(const CanonicalParams& theta, const NetworkSpec& spec,
                               const Matrix& x) {
  return view(spec, theta).forward(x);
}

ForwardTrace forward_canonical(const CanonicalParams& theta, const NetworkSpec& spec,
                               const Vector& x) {
  return view(spec, theta).forward(x.transpose());
}

ForwardTrace forward_whitened(const WhitenedParams& omega, const WhiteningCoeffs& phi,
                              const NetworkSpec& spec, const Matrix& x) {
  return view(spec, omega, phi).forward(x);
}

ForwardTrace forward_whitened(const WhitenedParams& omega, const WhiteningCoeffs& phi,
                              const NetworkSpec& spec, const Vector& x) {
  return view(spec, omega, phi).forward(x.transpose());
}

namespace {

void check_trace(const ForwardTrace& trace, const ModelView& model) {
  check_shapes(model.spec, model.layers);
  if (trace.kind != model.kind()) {
    throw ConsistencyError("backward: trace was produced by a " +
                           std::string(to_string(trace.kind)) + " forward pass but the model is " +
                           std::string(to_string(model.kind())));
  }
  const std::size_t depth = model.spec.depth();
  if (trace.layer_inputs.size() != depth || trace.pre.size() != depth ||
      trace.post.size() != depth) {
    throw ConsistencyError("backward: trace depth does not match the network");
  }
  for (std::size_t i = 0; i < depth; ++i) {
    const auto& w = model.layers[i].weight;
    if (trace.layer_inputs[i].cols() != w.cols() || trace.pre[i].cols() != w.rows() ||
        trace.pre[i].rows() != trace.input.rows()) {
      throw ConsistencyError("backward: trace shapes of layer " + std::to_string(i) +
                             " do not match the parameters");
    }
  }
}

}  // namespace

BackwardTrace backward_from_output_delta(const ForwardTrace& trace, const ModelView& model,
                                         Matrix output_delta) {
  check_trace(trace, model);
  const std::size_t depth = model.spec.depth();
  if (output_delta.rows() != trace.output().rows() ||
      output_delta.cols() != trace.output().cols()) {
    throw DimensionError("backward: output delta is " + shape(output_delta) + ", output is " +
                         shape(trace.output()));
  }
  BackwardTrace out;
  out.delta.resize(depth);
  out.grads.resize(depth);
  out.delta[depth - 1] = std::move(output_delta);
  for (std::size_t i = depth; i-- > 0;) {
    const Matrix& delta = out.delta[i];
    out.grads[i].weight = delta.transpose() * trace.layer_inputs[i];
    out.grads[i].bias = delta.colwise().sum().transpose();
    if (i == 0) break;
    Matrix grad_post = delta * model.layers[i].weight;
    if (model.whitening != nullptr) grad_post = grad_post * model.whitening->layers[i].u;
    out.delta[i - 1] = activation_backward(grad_post, model.spec.layers[i - 1].activation,
                                           trace.pre[i - 1], trace.post[i - 1]);
  }
  return out;
}

BackwardTrace backward(const ForwardTrace& trace, const ModelView& model, const Matrix& loss_grad) {
  check_trace(trace, model);
  const std::size_t last = model.spec.depth() - 1;
  if (loss_grad.rows() != trace.output().rows() || loss_grad.cols() != trace.output().cols()) {
    throw DimensionError("backward: loss gradient is " + shape(loss_grad) + ", output is " +
                         shape(trace.output()));
  }
  return backward_from_output_delta(
      trace, model,
      activation_backward(loss_grad, model.spec.layers[last].activation, trace.pre[last],
                          trace.post[last]));
}

BackwardTrace backward(const ForwardTrace& trace, const CanonicalParams& theta,
                       const NetworkSpec& spec, const Matrix& loss_grad) {
  return backward(trace, view(spec, theta), loss_grad);
}

BackwardTrace backward(const ForwardTrace& trace, const WhitenedParams& omega,
                       const WhiteningCoeffs& phi, const NetworkSpec& spec,
                       const Matrix& loss_grad) {
  return backward(trace, view(spec, omega, phi), loss_grad);
}

LossResult loss(LossKind kind, const Matrix& output, const Matrix& target) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw DimensionError("loss: output " + shape(output) + " vs target " + shape(target));
  }
  if (output.rows() == 0) throw DimensionError("loss: empty batch");
  const double batch = static_cast<double>(output.rows());
  LossResult r;
  switch (kind) {
    case LossKind::squared_error: {
      const Matrix diff = output - target;
      r.value = 0.5 * diff.squaredNorm() / batch;
      r.grad = diff / batch;
      break;
    }
    case LossKind::binary_cross_entropy:
    case LossKind::categorical_cross_entropy: {
      const bool binary = kind == LossKind::binary_cross_entropy;
      r.grad.resize(output.rows(), output.cols());
      double total = 0.0;
      for (Eigen::Index i = 0; i < output.rows(); ++i) {
        for (Eigen::Index j = 0; j < output.cols(); ++j) {
          double o = output(i, j);
          const double t = target(i, j);
          if (!(o >= kClampLow && o <= kClampHigh)) {
            o = std::clamp(std::isnan(o) ? 0.5 : o, kClampLow, kClampHigh);
            ++r.clamped;
          }
          if (binary) {
            total -= t * std::log(o) + (1.0 - t) * std::log1p(-o);
            r.grad(i, j) = (-t / o + (1.0 - t) / (1.0 - o)) / batch;
          } else {
            if (t != 0.0) total -= t * std::log(o);
            r.grad(i, j) = -t / o / batch;
          }
        }
      }
      r.value = total / batch;
      break;
    }
  }
  return r;
}

LossResult loss(LossKind kind, const Vector& output, const Vector& target) {
  return loss(kind, Matrix(output.transpose()), Matrix(target.transpose()));
}

Matrix output_delta(LossKind kind, const ForwardTrace& trace, const NetworkSpec& spec,
                    const Matrix& target) {
  const Matrix& out = trace.output();
  const Activation head = spec.head();
  if ((head == Activation::sigmoid && kind == LossKind::binary_cross_entropy) ||
      (head == Activation::softmax && kind == LossKind::categorical_cross_entropy)) {
    if (out.rows() != target.rows() || out.cols() != target.cols()) {
      throw DimensionError("output_delta: output " + shape(out) + " vs target " + shape(target));
    }
    return (out - target) / static_cast<double>(out.rows());
  }
  const LossResult r = loss(kind, out, target);
  return activation_backward(r.grad, head, trace.pre.back(), out);
}

CanonicalParams project_to_canonical(const WhitenedParams& omega, const WhiteningCoeffs& phi) {
  if (omega.layers.size() != phi.layers.size()) {
    throw DimensionError("project_to_canonical: parameter and whitening depths differ");
  }
  CanonicalParams theta;
  theta.layers.reserve(omega.layers.size());
  for (std::size_t i = 0; i < omega.layers.size(); ++i) {
    const auto& v = omega.layers[i];
    const auto& w = phi.layers[i];
    if (v.weight.cols() != w.u.rows() || w.u.rows() != w.u.cols() || w.c.size() != w.u.cols()) {
      throw DimensionError("project_to_canonical: layer " + std::to_string(i) +
                           " shapes are inconsistent");
    }
    AffineParams p;
    p.weight = v.weight * w.u;
    p.bias = v.bias - p.weight * w.c;
    theta.layers.push_back(std::move(p));
  }
  return theta;
}

WhitenedParams project_to_whitened(const CanonicalParams& theta, const WhiteningCoeffs& phi) {
  if (theta.layers.size() != phi.layers.size()) {
    throw DimensionError("project_to_whitened: parameter and whitening depths differ");
  }
  WhitenedParams omega;
  omega.layers.reserve(theta.layers.size());
  for (std::size_t i = 0; i < theta.layers.size(); ++i) {
    const auto& p = theta.layers[i];
    const auto& w = phi.layers[i];
    if (p.weight.cols() != w.u.rows() || w.u.rows() != w.u.cols() || w.c.size() != w.u.cols()) {
      throw DimensionError("project_to_whitened: layer " + std::to_string(i) +
                           " shapes are inconsistent");
    }
    AffineParams v;
    v.weight = p.weight * linalg::invert_whitening(w.u);
    v.bias = p.bias + p.weight * w.c;
    omega.layers.push_back(std::move(v));
  }
  return omega;
}

CanonicalParams init_fan_in(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  CanonicalParams theta;
  for (const auto& l : spec.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
    AffineParams p;
    p.weight.resize(static_cast<Eigen::Index>(l.out_dim), static_cast<Eigen::Index>(l.in_dim));
    for (Eigen::Index r = 0; r < p.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.weight.cols(); ++c) p.weight(r, c) = rng.uniform(-bound, bound);
    }
    p.bias = Vector::Zero(static_cast<Eigen::Index>(l.out_dim));
    theta.layers.push_back(std::move(p));
  }
  return theta;
}

}  // namespace prong
