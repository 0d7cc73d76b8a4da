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

#include "prong/prong.hpp"

#include <cmath>
#include <string>

#include "prong/errors.hpp"

namespace prong {

WhitenedModel WhitenedModel::from_canonical(const NetworkSpec& spec, const CanonicalParams& theta) {
  spec.validate();
  check_shapes(spec, theta.layers);
  return WhitenedModel{spec, WhitenedParams{theta.layers}, WhiteningCoeffs::identity(spec)};
}

ReparamReport prong_reparametrize(WhitenedModel& model, const Matrix& stat_samples, double epsilon) {
  if (stat_samples.rows() < 2) {
    throw InsufficientSamplesError("prong_reparametrize: need at least 2 statistics samples");
  }
  const ForwardTrace trace = model.view().forward(stat_samples);
  const CanonicalParams theta = model.canonical();

  ReparamReport report;
  WhiteningCoeffs phi;
  for (std::size_t i = 0; i < model.spec.depth(); ++i) {
    const Matrix& h = i == 0 ? trace.input : trace.post[i - 1];
    linalg::MomentEstimate m = linalg::estimate_moments(h);
    linalg::EigenDecomposition eig = linalg::sym_eig(m.covariance);
    Matrix u;
    try {
      u = linalg::zca_matrix(eig, epsilon);
    } catch (const SingularityError& e) {
      throw SingularityError("prong_reparametrize: input covariance of layer " +
                             std::to_string(i) + " is singular; " + e.what());
    }
    phi.layers.push_back({std::move(u), m.mean});
    report.moments.push_back(std::move(m));
    report.spectra.push_back(std::move(eig));
  }
  model.omega = project_to_whitened(theta, phi);
  model.phi = std::move(phi);
  return report;
}

std::vector<Vector> prong_plus_rescale(WhitenedModel& model, const ForwardTrace& batch_trace,
                                       RescaleState& state) {
  if (batch_trace.kind != Parametrization::whitened ||
      batch_trace.layer_inputs.size() != model.spec.depth()) {
    throw ConsistencyError("prong_plus_rescale: expected a whitened trace of this model");
  }
  const std::size_t depth = model.spec.depth();
  if (!state.initialized || state.running_var.size() != depth) {
    state.running_var.assign(depth, Vector());
  }

  std::vector<Vector> scales;
  scales.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    const Matrix& a = batch_trace.layer_inputs[i];
    if (a.cols() != model.phi.layers[i].u.rows()) {
      throw ConsistencyError("prong_plus_rescale: trace width mismatch in layer " + std::to_string(i));
    }
    Vector var;
    if (a.rows() < 2) {
      var = Vector::Ones(a.cols());
    } else {
      const Vector mean = a.colwise().sum().transpose() / static_cast<double>(a.rows());
      var = (a.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() /
            static_cast<double>(a.rows());
    }
    Vector& running = state.running_var[i];
    if (!state.initialized || running.size() != var.size()) {
      running = var;
    } else {
      running = state.decay * running + (1.0 - state.decay) * var;
    }
    Vector d = running.cwiseMax(0.0).cwiseSqrt().cwiseMax(kRescaleStdFloor);
    // rows of U_i shrink by D, columns of the consumer V_i grow by D
    model.phi.layers[i].u = d.cwiseInverse().asDiagonal() * model.phi.layers[i].u;
    model.omega.layers[i].weight = model.omega.layers[i].weight * d.asDiagonal();
    running = running.cwiseQuotient(d.cwiseAbs2());
    scales.push_back(std::move(d));
  }
  state.initialized = true;
  return scales;
}

}  // namespace prong
