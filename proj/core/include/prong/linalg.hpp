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

#ifndef PRONG_LINALG_HPP
#define PRONG_LINALG_HPP

#include <cstddef>
#include <span>

#include <Eigen/Core>

namespace prong {

// Dense row-major real matrix. Batches of examples are stored one example
// per row throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Eigenpairs of a symmetric matrix. Eigenvalues are sorted in descending
/// order and column k of `eigenvectors` belongs to eigenvalue k. Each column
/// is sign-normalized so that its largest-magnitude entry is positive.
struct EigenDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;
};

/// First and centered second moment of a sample set.
///
/// `covariance` is the population covariance E[(h - mean)(h - mean)^T]
/// (normalized by the sample count, not count - 1).
struct MomentEstimate {
  Vector mean;
  Matrix covariance;
  std::size_t sample_count = 0;
};

struct JacobiOptions {
  int max_sweeps = 100;
  // Relative to the Frobenius norm of the input.
  double tolerance = 1e-12;
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// The input is symmetrized as (A + A^T)/2 before rotating. Throws
/// DimensionError for non-square input, ValidationError if the input is not
/// symmetric within 1e-9 (relative to its largest entry) and
/// ConvergenceError if the off-diagonal mass is still above tolerance after
/// `max_sweeps` sweeps.
EigenDecomposition sym_eig(const Matrix& a, const JacobiOptions& options = {});

/// Moments of the rows of `samples`. Requires at least two rows.
MomentEstimate estimate_moments(const Matrix& samples);
MomentEstimate estimate_moments(std::span<const Vector> samples);

/// Streaming moment accumulator. Partial accumulators over disjoint row
/// ranges can be merged; merging in a fixed order gives a deterministic
/// result for a fixed partition.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Eigen::Index dim);

  void add(const Matrix& rows);
  void merge(const MomentAccumulator& other);
  std::size_t count() const { return count_; }
  MomentEstimate finish() const;

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Matrix scatter_;  // sum of (h - mean)(h - mean)^T
};

/// Whitening matrix U = diag(lambda + epsilon)^(-1/2) * E^T, where
/// covariance = E diag(lambda) E^T. Rows of U are the scaled eigenvectors.
///
/// Throws SingularityError when epsilon == 0 and the smallest eigenvalue is
/// not above 1e-12 times the largest one.
Matrix zca_matrix(const MomentEstimate& moments, double epsilon);
Matrix zca_matrix(const EigenDecomposition& spectrum, double epsilon);

/// lambda_max / lambda_min, where lambda_min is floored at
/// relative_floor * lambda_max. Throws ValidationError on a spectrum with
/// no positive eigenvalue.
double condition_number(const EigenDecomposition& spectrum, double relative_floor = 1e-12);
double condition_number(const Vector& eigenvalues, double relative_floor = 1e-12);

/// Inverse of a whitening matrix. Rows of a matrix produced by zca_matrix
/// (optionally rescaled row-wise) are mutually orthogonal, so U^-1 is
/// U^T diag(1 / |row_k|^2); other inputs fall back to a pivoted LU solve.
Matrix invert_whitening(const Matrix& u);

/// Largest absolute entry; 0 for an empty matrix.
double max_abs(const Matrix& m);
double max_abs(const Vector& v);

bool all_finite(const Matrix& m);
bool all_finite(const Vector& v);

}  // namespace linalg
}  // namespace prong

#endif  // PRONG_LINALG_HPP
