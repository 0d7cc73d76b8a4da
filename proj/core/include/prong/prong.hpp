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

#ifndef PRONG_PRONG_HPP
#define PRONG_PRONG_HPP

#include <vector>

#include "prong/linalg.hpp"
#include "prong/net.hpp"

namespace prong {

// A whitened network: model parameters Omega plus whitening coefficients Phi.
struct WhitenedModel {
  NetworkSpec spec;
  WhitenedParams omega;
  WhiteningCoeffs phi;

  // Omega = theta, Phi = identity, so the model computes the same function
  // as the canonical network it starts from.
  static WhitenedModel from_canonical(const NetworkSpec& spec, const CanonicalParams& theta);

  ModelView view() const { return prong::view(spec, omega, phi); }
  CanonicalParams canonical() const { return project_to_canonical(omega, phi); }
};

struct ReparamReport {
  // Moments of each layer input measured under the old parametrization and
  // the spectrum they were whitened with.
  std::vector<linalg::MomentEstimate> moments;
  std::vector<linalg::EigenDecomposition> spectra;
};

/// Re-estimates Phi from the rows of `stat_samples` and re-projects Omega so
/// that the network function is unchanged.
///
/// Steps: one forward sweep of the samples under the current (Omega, Phi);
/// theta = P_Phi^-1(Omega); for every represented layer, c = mean and
/// U = diag(lambda + epsilon)^-1/2 E^T from the centered covariance of that
/// layer's input; Omega = P_Phi'(theta).
///
/// Throws SingularityError (suggesting a positive epsilon) when epsilon is 0
/// and some covariance is singular; the model is left untouched in that case.
ReparamReport prong_reparametrize(WhitenedModel& model, const Matrix& stat_samples, double epsilon);

// Running variance of every whitened layer input, for PRONG+.
struct RescaleState {
  std::vector<Vector> running_var;
  double decay = 0.9;
  bool initialized = false;

  void reset() {
    running_var.clear();
    initialized = false;
  }
};

constexpr double kRescaleStdFloor = 1e-6;

/// PRONG+ diagonal rescaling after a gradient update.
///
/// Updates the running variance of each whitened input a_i from the batch
/// trace, then with D = diag(running std, floored at 1e-6) sets U_i <- D^-1 U_i
/// and scales the columns of the consuming weight V_{i+1} by D. c is
/// unchanged and so is the network function. Returns the applied D per
/// represented layer. The running variance is re-expressed in the new
/// coordinates after rescaling.
std::vector<Vector> prong_plus_rescale(WhitenedModel& model, const ForwardTrace& batch_trace,
                                       RescaleState& state);

}  // namespace prong

#endif  // PRONG_PRONG_HPP
