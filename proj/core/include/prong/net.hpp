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

#ifndef PRONG_NET_HPP
#define PRONG_NET_HPP

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "prong/linalg.hpp"

namespace prong {

enum class Activation { sigmoid, tanh, relu, softmax, identity };

std::string_view to_string(Activation f);
Activation activation_from_string(std::string_view name);

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::identity;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// A chain of fully connected layers. Layer i maps R^{in_dim} to R^{out_dim}
// and its in_dim must equal the previous layer's out_dim.
struct NetworkSpec {
  std::vector<LayerSpec> layers;

  // Builds a chain from widths {n0, n1, ..., nL}, one activation per layer.
  static NetworkSpec chain(const std::vector<std::size_t>& widths,
                           const std::vector<Activation>& activations);

  // Throws ValidationError on an empty chain, zero widths, broken chaining
  // or a softmax anywhere but the last layer.
  void validate() const;

  std::size_t depth() const { return layers.size(); }
  std::size_t input_dim() const { return layers.front().in_dim; }
  std::size_t output_dim() const { return layers.back().out_dim; }
  Activation head() const { return layers.back().activation; }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Weight (out_dim x in_dim) and bias (out_dim) of one affine map.
struct AffineParams {
  Matrix weight;
  Vector bias;
};

// theta = {W_1, b_1, ..., W_L, b_L}.
struct CanonicalParams {
  std::vector<AffineParams> layers;
};

// Omega = {V_1, d_1, ..., V_L, d_L}. V_i acts on whitened, centered inputs.
struct WhitenedParams {
  std::vector<AffineParams> layers;
};

// Whitening of the input to layer i+1: a = U (h - c), with h the output of
// layer i (h_0 is the network input). Never touched by gradient updates.
struct Whitening {
  Matrix u;
  Vector c;
};

// Phi = {U_0, c_0, ..., U_{L-1}, c_{L-1}}; entry i feeds layer i+1.
struct WhiteningCoeffs {
  std::vector<Whitening> layers;

  // U_i = I, c_i = 0 for every represented layer.
  static WhiteningCoeffs identity(const NetworkSpec& spec);
};

enum class Parametrization { canonical, whitened };

std::string_view to_string(Parametrization kind);

/// Activations of one batch (one example per row).
///
/// `layer_inputs[i]` is the matrix that multiplies the weights of layer i:
/// h_{i-1} in the canonical case and a_{i-1} = U_{i-1}(h_{i-1} - c_{i-1}) in
/// the whitened case. `pre[i]` and `post[i]` are z_i and h_i = f_i(z_i).
struct ForwardTrace {
  Parametrization kind = Parametrization::canonical;
  Matrix input;
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
  std::size_t batch_size() const { return static_cast<std::size_t>(input.rows()); }
};

/// Backpropagated quantities for one batch. `delta[i]` is dLoss/dz_i (one
/// row per example) and `grads[i]` holds the weight and bias gradients of
/// layer i, summed over the rows of delta.
struct BackwardTrace {
  std::vector<Matrix> delta;
  std::vector<AffineParams> grads;
};

// Non-owning view of a network in either parametrization. `whitening` is
// null for the canonical parametrization.
struct ModelView {
  const NetworkSpec& spec;
  const std::vector<AffineParams>& layers;
  const WhiteningCoeffs* whitening = nullptr;

  Parametrization kind() const {
    return whitening == nullptr ? Parametrization::canonical : Parametrization::whitened;
  }
  ForwardTrace forward(const Matrix& x) const;
};

ModelView view(const NetworkSpec& spec, const CanonicalParams& theta);
ModelView view(const NetworkSpec& spec, const WhitenedParams& omega, const WhiteningCoeffs& phi);

/// Canonical forward pass over a batch of row inputs.
///
/// Throws DimensionError when x does not have spec.input_dim() columns and
/// NumericError naming the layer when a non-finite value appears.
ForwardTrace forward_canonical(const CanonicalParams& theta, const NetworkSpec& spec,
                               const Matrix& x);
ForwardTrace forward_canonical(const CanonicalParams& theta, const NetworkSpec& spec,
                               const Vector& x);

/// h_i = f_i(V_i U_{i-1} (h_{i-1} - c_{i-1}) + d_i), recording the whitened
/// inputs in `layer_inputs`.
ForwardTrace forward_whitened(const WhitenedParams& omega, const WhiteningCoeffs& phi,
                              const NetworkSpec& spec, const Matrix& x);
ForwardTrace forward_whitened(const WhitenedParams& omega, const WhiteningCoeffs& phi,
                              const NetworkSpec& spec, const Vector& x);

/// Backpropagates dLoss/dOutput through the network. Gradients are
/// G_i = delta_i^T * layer_inputs[i], so batch averaging must already be
/// folded into `loss_grad` (the loss() helper does this).
///
/// Throws ConsistencyError if the trace does not match the parameters.
/// In the whitened case the chain rule runs through a = U (h - c), so the
/// whitening coefficients are part of the model view.
///
/// Throws ConsistencyError if the trace does not match the model.
BackwardTrace backward(const ForwardTrace& trace, const ModelView& model, const Matrix& loss_grad);
BackwardTrace backward(const ForwardTrace& trace, const CanonicalParams& theta,
                       const NetworkSpec& spec, const Matrix& loss_grad);
BackwardTrace backward(const ForwardTrace& trace, const WhitenedParams& omega,
                       const WhiteningCoeffs& phi, const NetworkSpec& spec,
                       const Matrix& loss_grad);

/// Same as backward() but starting from dLoss/dz_L directly.
BackwardTrace backward_from_output_delta(const ForwardTrace& trace, const ModelView& model,
                                         Matrix output_delta);

/// dLoss/dz given dLoss/dh for one layer (softmax uses its full Jacobian).
Matrix activation_backward(const Matrix& grad_post, Activation f, const Matrix& pre,
                           const Matrix& post);

/// Applies f row-wise (softmax) or elementwise (everything else).
Matrix activate(Activation f, const Matrix& pre);

enum class LossKind { squared_error, binary_cross_entropy, categorical_cross_entropy };

std::string_view to_string(LossKind kind);
LossKind loss_from_string(std::string_view name);

struct LossResult {
  double value = 0.0;  // mean over the batch of the per-example loss
  Matrix grad;         // d value / d output
  std::size_t clamped = 0;  // cross-entropy outputs clamped into [1e-12, 1 - 1e-12]
};

/// Per-example losses: 0.5 |o - t|^2, -sum t log o + (1 - t) log(1 - o),
/// and -sum t log o, averaged over the rows of the batch.
LossResult loss(LossKind kind, const Matrix& output, const Matrix& target);
LossResult loss(LossKind kind, const Vector& output, const Vector& target);

/// dLoss/dz_L for the batch. Sigmoid with binary cross-entropy and softmax
/// with categorical cross-entropy give exactly (h_L - y) / batch; other
/// pairs go through the activation derivative.
Matrix output_delta(LossKind kind, const ForwardTrace& trace, const NetworkSpec& spec,
                    const Matrix& target);

/// theta = P_Phi^-1(Omega): W_i = V_i U_{i-1}, b_i = d_i - W_i c_{i-1}.
CanonicalParams project_to_canonical(const WhitenedParams& omega, const WhiteningCoeffs& phi);

/// Omega = P_Phi(theta): V_i = W_i U_{i-1}^-1, d_i = b_i + W_i c_{i-1}.
/// Throws SingularityError when some U_i is singular.
WhitenedParams project_to_whitened(const CanonicalParams& theta, const WhiteningCoeffs& phi);

/// W entries uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
CanonicalParams init_fan_in(const NetworkSpec& spec, std::uint64_t seed);

// Shape checks; throw DimensionError.
void check_shapes(const NetworkSpec& spec, const std::vector<AffineParams>& layers);
void check_shapes(const NetworkSpec& spec, const WhiteningCoeffs& phi);

}  // namespace prong

#endif  // PRONG_NET_HPP
