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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "../support/oracles.hpp"
#include "prong/errors.hpp"
#include "prong/linalg.hpp"
#include "prong/net.hpp"

namespace prong {
namespace {

using linalg::max_abs;

NetworkSpec two_layer_tanh() {
  return NetworkSpec::chain({4, 6, 3}, {Activation::tanh, Activation::tanh});
}

CanonicalParams random_params(const NetworkSpec& spec, std::uint64_t seed, double scale = 0.8) {
  CanonicalParams theta = init_fan_in(spec, seed);
  Rng rng(seed + 1000);
  for (auto& l : theta.layers) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = scale * rng.uniform(-1.0, 1.0);
  }
  return theta;
}

// Random whitening with full-rank, non-orthogonal U and nonzero c.
WhiteningCoeffs random_whitening(const NetworkSpec& spec, std::uint64_t seed) {
  WhiteningCoeffs phi;
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    const auto n = static_cast<Eigen::Index>(spec.layers[i].in_dim);
    linalg::MomentEstimate m;
    m.covariance = testing::random_spd(n, seed + i, 0.2);
    m.mean = testing::random_matrix(n, 1, seed + 50 + i).col(0);
    m.sample_count = 10;
    phi.layers.push_back({linalg::zca_matrix(m, 0.01), m.mean});
  }
  return phi;
}

std::vector<double> to_std(const Matrix& row) {
  return std::vector<double>(row.data(), row.data() + row.size());
}

TEST(NetworkSpec, Validation) {
  EXPECT_NO_THROW(two_layer_tanh().validate());
  EXPECT_THROW(NetworkSpec::chain({3, 2, 2}, {Activation::softmax, Activation::sigmoid}),
               ValidationError);
  NetworkSpec broken;
  broken.layers = {{3, 2, Activation::tanh}, {4, 1, Activation::sigmoid}};
  EXPECT_THROW(broken.validate(), ValidationError);
  EXPECT_THROW(NetworkSpec{}.validate(), ValidationError);
}

TEST(ForwardCanonical, IdentityLayer) {
  const auto spec = NetworkSpec::chain({2, 2}, {Activation::identity});
  CanonicalParams theta{{{Matrix::Identity(2, 2), Vector::Zero(2)}}};
  Vector x(2);
  x << 1.0, 2.0;
  const auto trace = forward_canonical(theta, spec, x);
  EXPECT_EQ(trace.output()(0, 0), 1.0);
  EXPECT_EQ(trace.output()(0, 1), 2.0);
}

TEST(ForwardCanonical, ZeroSigmoidLayerGivesOneHalf) {
  const auto spec = NetworkSpec::chain({3, 4}, {Activation::sigmoid});
  CanonicalParams theta{{{Matrix::Zero(4, 3), Vector::Zero(4)}}};
  const auto trace = forward_canonical(theta, spec, testing::random_matrix(5, 3, 1, 10.0));
  EXPECT_EQ(trace.output(), Matrix::Constant(5, 4, 0.5));
}

TEST(ForwardCanonical, MatchesScalarLoopReference) {
  const auto spec = two_layer_tanh();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto theta = random_params(spec, seed);
    const Matrix x = testing::random_matrix(8, 4, seed + 7, 2.0);
    const auto trace = forward_canonical(theta, spec, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto ref = testing::naive_forward(spec, theta.layers, to_std(x.row(r)));
      for (std::size_t k = 0; k < ref.size(); ++k) {
        EXPECT_NEAR(trace.output()(r, static_cast<Eigen::Index>(k)), ref[k], 1e-12);
      }
    }
  }
}

TEST(ForwardCanonical, HeadsStayInRange) {
  const auto soft = NetworkSpec::chain({5, 7, 4}, {Activation::relu, Activation::softmax});
  const auto trace = forward_canonical(random_params(soft, 3, 5.0), soft,
                                       testing::random_matrix(20, 5, 4, 3.0));
  for (Eigen::Index r = 0; r < 20; ++r) {
    EXPECT_NEAR(trace.output().row(r).sum(), 1.0, 1e-12);
    EXPECT_GT(trace.output().row(r).minCoeff(), 0.0);
  }
  const auto sig = NetworkSpec::chain({5, 1}, {Activation::sigmoid});
  const auto t2 = forward_canonical(random_params(sig, 5), sig, testing::random_matrix(20, 5, 6));
  EXPECT_GT(t2.output().minCoeff(), 0.0);
  EXPECT_LT(t2.output().maxCoeff(), 1.0);
}

TEST(ForwardCanonical, Errors) {
  const auto spec = two_layer_tanh();
  const auto theta = random_params(spec, 1);
  EXPECT_THROW(forward_canonical(theta, spec, Matrix(Matrix::Zero(2, 5))), DimensionError);
  CanonicalParams poisoned = theta;
  poisoned.layers[1].weight(0, 0) = std::numeric_limits<double>::infinity();
  try {
    forward_canonical(poisoned, spec, Matrix(Matrix::Ones(1, 4)));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
}

TEST(ForwardWhitened, IdentityWhiteningEqualsCanonical) {
  const auto spec = two_layer_tanh();
  const auto theta = random_params(spec, 2);
  const WhitenedParams omega{theta.layers};
  const Matrix x = testing::random_matrix(6, 4, 3);
  const auto a = forward_canonical(theta, spec, x);
  const auto b = forward_whitened(omega, WhiteningCoeffs::identity(spec), spec, x);
  EXPECT_EQ(a.output(), b.output());
}

TEST(ForwardWhitened, CenteringAtBatchMeanZeroesWhitenedMean) {
  const auto spec = NetworkSpec::chain({3, 2}, {Activation::tanh});
  const Matrix x = testing::random_matrix(50, 3, 9) + Matrix::Constant(50, 3, 0.4);
  WhiteningCoeffs phi = WhiteningCoeffs::identity(spec);
  phi.layers[0].c = x.colwise().mean().transpose();
  phi.layers[0].u = testing::random_spd(3, 4);
  const WhitenedParams omega{random_params(spec, 1).layers};
  const auto trace = forward_whitened(omega, phi, spec, x);
  EXPECT_LT(max_abs(Vector(trace.layer_inputs[0].colwise().mean().transpose())), 1e-9);
}

TEST(ForwardWhitened, MatchesScalarLoopReference) {
  const auto spec = two_layer_tanh();
  const auto phi = random_whitening(spec, 4);
  const WhitenedParams omega{random_params(spec, 4).layers};
  const Matrix x = testing::random_matrix(5, 4, 11);
  const auto trace = forward_whitened(omega, phi, spec, x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto ref = testing::naive_forward(spec, omega.layers, to_std(x.row(r)), &phi);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      EXPECT_NEAR(trace.output()(r, static_cast<Eigen::Index>(k)), ref[k], 1e-12);
    }
  }
}

TEST(Projection, IdentityWhiteningIsIdentityMap) {
  const auto spec = two_layer_tanh();
  const auto theta = random_params(spec, 5);
  const auto phi = WhiteningCoeffs::identity(spec);
  const auto omega = project_to_whitened(theta, phi);
  const auto back = project_to_canonical(omega, phi);
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    EXPECT_EQ(omega.layers[i].weight, theta.layers[i].weight);
    EXPECT_EQ(omega.layers[i].bias, theta.layers[i].bias);
    EXPECT_EQ(back.layers[i].weight, theta.layers[i].weight);
  }
}

TEST(Projection, ScalarHandExample) {
  // V = 1, U = 2, c = 1, d = 0: z = 2 (h - 1) = 2h - 2.
  WhitenedParams omega{{{Matrix::Identity(1, 1), Vector::Zero(1)}}};
  WhiteningCoeffs phi{{{Matrix::Constant(1, 1, 2.0), Vector::Ones(1)}}};
  const auto theta = project_to_canonical(omega, phi);
  EXPECT_EQ(theta.layers[0].weight(0, 0), 2.0);
  EXPECT_EQ(theta.layers[0].bias(0), -2.0);
}

TEST(Projection, RoundTripAndFunctionalEquality) {
  const auto spec = NetworkSpec::chain({5, 7, 6, 2}, {Activation::tanh, Activation::sigmoid,
                                                     Activation::softmax});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto phi = random_whitening(spec, seed);
    const WhitenedParams omega{random_params(spec, seed).layers};
    const auto theta = project_to_canonical(omega, phi);
    const auto again = project_to_whitened(theta, phi);
    for (std::size_t i = 0; i < spec.depth(); ++i) {
      EXPECT_LT(max_abs(Matrix(again.layers[i].weight - omega.layers[i].weight)), 1e-10);
      EXPECT_LT(max_abs(Vector(again.layers[i].bias - omega.layers[i].bias)), 1e-10);
    }
    const Matrix x = testing::random_matrix(100, 5, seed + 300, 2.0);
    const auto a = forward_whitened(omega, phi, spec, x);
    const auto b = forward_canonical(theta, spec, x);
    EXPECT_LT(max_abs(Matrix(a.output() - b.output())), 1e-10);
  }
}

TEST(Projection, FunctionPreservedUnderNewWhitening) {
  const auto spec = two_layer_tanh();
  const auto phi_old = random_whitening(spec, 21);
  const auto phi_new = random_whitening(spec, 42);
  const WhitenedParams omega{random_params(spec, 6).layers};
  const auto theta = project_to_canonical(omega, phi_old);
  const auto omega_new = project_to_whitened(theta, phi_new);
  const Matrix x = testing::random_matrix(100, 4, 77, 2.0);
  const auto before = forward_whitened(omega, phi_old, spec, x);
  const auto after = forward_whitened(omega_new, phi_new, spec, x);
  EXPECT_LT(max_abs(Matrix(before.output() - after.output())), 1e-9);
}

TEST(Projection, SingularWhiteningRejected) {
  const auto spec = NetworkSpec::chain({2, 1}, {Activation::identity});
  CanonicalParams theta{{{Matrix::Ones(1, 2), Vector::Zero(1)}}};
  WhiteningCoeffs phi{{{Matrix::Ones(2, 2), Vector::Zero(2)}}};
  EXPECT_THROW(project_to_whitened(theta, phi), SingularityError);
}

TEST(Loss, HandExamples) {
  Matrix o = testing::random_matrix(3, 4, 1);
  const auto se = loss(LossKind::squared_error, o, o);
  EXPECT_EQ(se.value, 0.0);
  EXPECT_EQ(max_abs(se.grad), 0.0);

  const auto bce = loss(LossKind::binary_cross_entropy, Matrix(Matrix::Constant(1, 1, 0.5)),
                        Matrix(Matrix::Ones(1, 1)));
  EXPECT_NEAR(bce.value, std::log(2.0), 1e-15);
  EXPECT_NEAR(bce.grad(0, 0), -2.0, 1e-15);

  Matrix target = Matrix::Zero(1, 10);
  target(0, 3) = 1.0;
  const auto cce = loss(LossKind::categorical_cross_entropy, Matrix(Matrix::Constant(1, 10, 0.1)), target);
  EXPECT_NEAR(cce.value, std::log(10.0), 1e-14);
}

TEST(Loss, SquaredErrorIsHalfNormAveragedOverBatch) {
  Matrix o(2, 2), t(2, 2);
  o << 1, 2, 3, 4;
  t << 0, 0, 0, 0;
  const auto r = loss(LossKind::squared_error, o, t);
  EXPECT_DOUBLE_EQ(r.value, (0.5 * 5 + 0.5 * 25) / 2);
  EXPECT_DOUBLE_EQ(r.grad(1, 1), 4.0 / 2);
}

TEST(Loss, CrossEntropyClampsSaturatedOutputs) {
  Matrix o(1, 2), t(1, 2);
  o << 0.0, 1.0;
  t << 1.0, 0.0;
  const auto r = loss(LossKind::binary_cross_entropy, o, t);
  EXPECT_EQ(r.clamped, 2u);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_NEAR(r.value, -2.0 * std::log(1e-12), 1e-4);
}

double batch_loss(const ModelView& m, LossKind kind, const Matrix& x, const Matrix& y) {
  return loss(kind, m.forward(x).output(), y).value;
}

struct GradCase {
  NetworkSpec spec;
  LossKind loss;
};

std::vector<GradCase> grad_cases() {
  return {
      {NetworkSpec::chain({4, 5, 3}, {Activation::tanh, Activation::identity}),
       LossKind::squared_error},
      {NetworkSpec::chain({4, 5, 4, 1}, {Activation::sigmoid, Activation::relu, Activation::sigmoid}),
       LossKind::binary_cross_entropy},
      {NetworkSpec::chain({3, 6, 4}, {Activation::tanh, Activation::softmax}),
       LossKind::categorical_cross_entropy},
      {NetworkSpec::chain({4, 3, 4}, {Activation::sigmoid, Activation::sigmoid}),
       LossKind::squared_error},
  };
}

Matrix targets_for(const GradCase& c, Eigen::Index rows, std::uint64_t seed) {
  const auto out = static_cast<Eigen::Index>(c.spec.output_dim());
  Rng rng(seed);
  Matrix y = Matrix::Zero(rows, out);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (c.loss == LossKind::categorical_cross_entropy) {
      y(r, static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(out)))) = 1.0;
    } else if (c.loss == LossKind::binary_cross_entropy) {
      for (Eigen::Index k = 0; k < out; ++k) y(r, k) = rng.uniform() < 0.5 ? 0.0 : 1.0;
    } else {
      for (Eigen::Index k = 0; k < out; ++k) y(r, k) = rng.uniform();
    }
  }
  return y;
}

TEST(Backward, IdentityNetWithMatchingTargetHasZeroGradient) {
  const auto spec = NetworkSpec::chain({3, 3}, {Activation::identity});
  CanonicalParams theta{{{Matrix::Identity(3, 3), Vector::Zero(3)}}};
  const Matrix x = testing::random_matrix(4, 3, 1);
  const auto trace = forward_canonical(theta, spec, x);
  const auto bw = backward(trace, theta, spec, loss(LossKind::squared_error, trace.output(), x).grad);
  EXPECT_EQ(max_abs(bw.grads[0].weight), 0.0);
  EXPECT_EQ(max_abs(bw.grads[0].bias), 0.0);
}

TEST(Backward, LogisticUnitDeltaIsOutputMinusTarget) {
  const auto spec = NetworkSpec::chain({3, 1}, {Activation::sigmoid});
  const auto theta = random_params(spec, 8);
  const Matrix x = testing::random_matrix(1, 3, 2);
  const Matrix y = Matrix::Ones(1, 1);
  const auto trace = forward_canonical(theta, spec, x);
  const auto bw = backward(trace, theta, spec,
                           loss(LossKind::binary_cross_entropy, trace.output(), y).grad);
  EXPECT_NEAR(bw.delta[0](0, 0), trace.output()(0, 0) - 1.0, 1e-14);
  EXPECT_LT(max_abs(Matrix(output_delta(LossKind::binary_cross_entropy, trace, spec, y) -
                           (trace.output() - y))), 1e-15);
}

TEST(Backward, CanonicalGradientsMatchFiniteDifferences) {
  for (const auto& c : grad_cases()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      CanonicalParams theta = random_params(c.spec, seed);
      const Matrix x = testing::random_matrix(6, static_cast<Eigen::Index>(c.spec.input_dim()), seed + 5, 1.5);
      const Matrix y = targets_for(c, 6, seed);
      const auto trace = forward_canonical(theta, c.spec, x);
      const auto bw = backward(trace, theta, c.spec, loss(c.loss, trace.output(), y).grad);
      auto f = [&] { return batch_loss(view(c.spec, theta), c.loss, x, y); };
      for (std::size_t i = 0; i < c.spec.depth(); ++i) {
        EXPECT_LT(testing::max_gradient_error(f, theta.layers[i].weight, bw.grads[i].weight), 1e-5);
        EXPECT_LT(testing::max_gradient_error(f, theta.layers[i].bias, bw.grads[i].bias), 1e-5);
      }
    }
  }
}

TEST(Backward, WhitenedGradientsMatchFiniteDifferences) {
  for (const auto& c : grad_cases()) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto phi = random_whitening(c.spec, seed + 11);
      WhitenedParams omega{random_params(c.spec, seed).layers};
      const Matrix x = testing::random_matrix(6, static_cast<Eigen::Index>(c.spec.input_dim()), seed + 5, 1.5);
      const Matrix y = targets_for(c, 6, seed);
      const auto trace = forward_whitened(omega, phi, c.spec, x);
      const auto bw = backward(trace, omega, phi, c.spec, loss(c.loss, trace.output(), y).grad);
      auto f = [&] { return batch_loss(view(c.spec, omega, phi), c.loss, x, y); };
      for (std::size_t i = 0; i < c.spec.depth(); ++i) {
        EXPECT_LT(testing::max_gradient_error(f, omega.layers[i].weight, bw.grads[i].weight), 1e-5);
        EXPECT_LT(testing::max_gradient_error(f, omega.layers[i].bias, bw.grads[i].bias), 1e-5);
      }
    }
  }
}

TEST(Backward, GradientDualityWithoutCentering) {
  const auto spec = two_layer_tanh();
  auto phi = random_whitening(spec, 3);
  for (auto& w : phi.layers) w.c.setZero();
  const WhitenedParams omega{random_params(spec, 3).layers};
  const auto theta = project_to_canonical(omega, phi);
  const Matrix x = testing::random_matrix(10, 4, 4);
  const Matrix y = testing::random_matrix(10, 3, 5);
  const auto tw = forward_whitened(omega, phi, spec, x);
  const auto tc = forward_canonical(theta, spec, x);
  const auto gw = backward(tw, omega, phi, spec, loss(LossKind::squared_error, tw.output(), y).grad);
  const auto gc = backward(tc, theta, spec, loss(LossKind::squared_error, tc.output(), y).grad);
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    const Matrix expected = gc.grads[i].weight * phi.layers[i].u.transpose();
    EXPECT_LT(max_abs(Matrix(gw.grads[i].weight - expected)), 1e-10);
  }
}

TEST(Backward, GradientDualityWithCentering) {
  const auto spec = two_layer_tanh();
  const auto phi = random_whitening(spec, 8);
  const WhitenedParams omega{random_params(spec, 8).layers};
  const auto theta = project_to_canonical(omega, phi);
  const Matrix x = testing::random_matrix(10, 4, 6);
  const Matrix y = testing::random_matrix(10, 3, 7);
  const auto tw = forward_whitened(omega, phi, spec, x);
  const auto tc = forward_canonical(theta, spec, x);
  const auto gw = backward(tw, omega, phi, spec, loss(LossKind::squared_error, tw.output(), y).grad);
  const auto gc = backward(tc, theta, spec, loss(LossKind::squared_error, tc.output(), y).grad);
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    const Matrix centered = gc.grads[i].weight - gc.grads[i].bias * phi.layers[i].c.transpose();
    EXPECT_LT(max_abs(Matrix(gw.grads[i].weight - centered * phi.layers[i].u.transpose())), 1e-10);
    EXPECT_LT(max_abs(Vector(gw.grads[i].bias - gc.grads[i].bias)), 1e-12);
  }
}

TEST(Backward, MismatchedTraceRejected) {
  const auto spec = two_layer_tanh();
  const auto theta = random_params(spec, 1);
  const auto phi = WhiteningCoeffs::identity(spec);
  const auto trace = forward_canonical(theta, spec, Matrix(Matrix::Ones(2, 4)));
  const Matrix g = Matrix::Ones(2, 3);
  EXPECT_THROW(backward(trace, WhitenedParams{theta.layers}, phi, spec, g), ConsistencyError);
  const auto other = NetworkSpec::chain({4, 5, 3}, {Activation::tanh, Activation::tanh});
  EXPECT_THROW(backward(trace, random_params(other, 2), other, g), ConsistencyError);
  EXPECT_THROW(backward(trace, theta, spec, Matrix(Matrix::Ones(3, 3))), DimensionError);
}

TEST(InitFanIn, BoundsDeterminismAndSpread) {
  const auto spec = NetworkSpec::chain({100, 100, 10}, {Activation::tanh, Activation::sigmoid});
  const auto a = init_fan_in(spec, 9);
  const auto b = init_fan_in(spec, 9);
  EXPECT_LE(max_abs(a.layers[0].weight), 0.1);
  EXPECT_EQ(max_abs(a.layers[0].bias), 0.0);
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    EXPECT_EQ(a.layers[i].weight, b.layers[i].weight);
  }
  const Matrix& big = a.layers[0].weight;
  const double mean = big.mean();
  const double sd = std::sqrt((big.array() - mean).square().mean());
  EXPECT_NEAR(sd, 0.1 / std::sqrt(3.0), 0.05 * 0.1 / std::sqrt(3.0));
  EXPECT_NE(init_fan_in(spec, 10).layers[0].weight, big);
}

}  // namespace
}  // namespace prong
