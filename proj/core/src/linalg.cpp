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

#include "prong/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "prong/errors.hpp"

namespace prong::linalg {

namespace {

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

// One Jacobi rotation zeroing a(p, q). `a` is a full symmetric n x n buffer,
// `vt` holds the accumulated eigenvectors as rows.
void rotate(std::vector<double>& a, std::vector<double>& vt, std::size_t n, std::size_t p,
            std::size_t q) {
  const double apq = a[p * n + q];
  const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 0.5 / theta;
  } else {
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);

  a[p * n + p] -= t * apq;
  a[q * n + q] += t * apq;
  a[p * n + q] = 0.0;
  a[q * n + p] = 0.0;

  for (std::size_t r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double g = a[r * n + p];
    const double h = a[r * n + q];
    const double rp = g - s * (h + g * tau);
    const double rq = h + s * (g - h * tau);
    a[r * n + p] = rp;
    a[p * n + r] = rp;
    a[r * n + q] = rq;
    a[q * n + r] = rq;
  }

  double* vp = vt.data() + p * n;
  double* vq = vt.data() + q * n;
  for (std::size_t r = 0; r < n; ++r) {
    const double g = vp[r];
    const double h = vq[r];
    vp[r] = g - s * (h + g * tau);
    vq[r] = h + s * (g - h * tau);
  }
}

double off_diagonal_norm(const std::vector<double>& a, std::size_t n) {
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) sum += a[p * n + q] * a[p * n + q];
  }
  return std::sqrt(2.0 * sum);
}

}  // namespace

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }
double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

EigenDecomposition sym_eig(const Matrix& input, const JacobiOptions& options) {
  require_square(input, "sym_eig");
  if (!input.allFinite()) throw NumericError("sym_eig: input has non-finite entries");
  const auto n = static_cast<std::size_t>(input.rows());

  const double scale = max_abs(input);
  const double asym = n == 0 ? 0.0 : (input - input.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(scale, 1e-300)) {
    throw ValidationError("sym_eig: input is not symmetric (max |A - A^T| = " +
                          std::to_string(asym) + ")");
  }

  std::vector<double> a(n * n);
  std::vector<double> vt(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    vt[i * n + i] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      a[i * n + j] = 0.5 * (input(i, j) + input(j, i));
    }
  }

  const double frob = input.norm();
  const double target = options.tolerance * frob;
  bool converged = off_diagonal_norm(a, n) <= target;
  for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p * n + q] != 0.0) rotate(a, vt, n, p, q);
      }
    }
    converged = off_diagonal_norm(a, n) <= target;
  }
  if (!converged) {
    throw ConvergenceError("sym_eig: Jacobi iteration did not converge within " +
                           std::to_string(options.max_sweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return a[l * n + l] > a[r * n + r]; });

  EigenDecomposition out;
  out.eigenvalues.resize(static_cast<Eigen::Index>(n));
  out.eigenvectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues(k) = a[src * n + src];
    const double* v = vt.data() + src * n;
    std::size_t arg = 0;
    for (std::size_t r = 1; r < n; ++r) {
      if (std::abs(v[r]) > std::abs(v[arg])) arg = r;
    }
    const double sign = v[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = sign * v[r];
  }
  return out;
}

MomentEstimate estimate_moments(const Matrix& samples) {
  if (samples.rows() < 2) {
    throw InsufficientSamplesError("estimate_moments: need at least 2 samples, got " +
                                   std::to_string(samples.rows()));
  }
  const double count = static_cast<double>(samples.rows());
  MomentEstimate out;
  out.sample_count = static_cast<std::size_t>(samples.rows());
  out.mean = samples.colwise().sum().transpose() / count;
  Matrix centered = samples.rowwise() - out.mean.transpose();
  Matrix cov = centered.transpose() * centered / count;
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

MomentEstimate estimate_moments(std::span<const Vector> samples) {
  if (samples.size() < 2) {
    throw InsufficientSamplesError("estimate_moments: need at least 2 samples, got " +
                                   std::to_string(samples.size()));
  }
  const Eigen::Index dim = samples.front().size();
  Matrix stacked(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].size() != dim) {
      throw DimensionError("estimate_moments: sample " + std::to_string(i) + " has dimension " +
                           std::to_string(samples[i].size()) + ", expected " +
                           std::to_string(dim));
    }
    stacked.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
  }
  return estimate_moments(stacked);
}

MomentAccumulator::MomentAccumulator(Eigen::Index dim)
    : mean_(Vector::Zero(dim)), scatter_(Matrix::Zero(dim, dim)) {}

void MomentAccumulator::add(const Matrix& rows) {
  if (rows.cols() != mean_.size()) {
    throw DimensionError("MomentAccumulator::add: expected " + std::to_string(mean_.size()) +
                         " columns, got " + std::to_string(rows.cols()));
  }
  if (rows.rows() == 0) return;
  MomentAccumulator part(mean_.size());
  part.count_ = static_cast<std::size_t>(rows.rows());
  part.mean_ = rows.colwise().sum().transpose() / static_cast<double>(rows.rows());
  Matrix centered = rows.rowwise() - part.mean_.transpose();
  part.scatter_ = centered.transpose() * centered;
  merge(part);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.mean_.size() != mean_.size()) {
    throw DimensionError("MomentAccumulator::merge: dimension mismatch");
  }
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const Vector delta = other.mean_ - mean_;
  mean_ += delta * (nb / n);
  scatter_ += other.scatter_ + (delta * delta.transpose()) * (na * nb / n);
  count_ += other.count_;
}

MomentEstimate MomentAccumulator::finish() const {
  if (count_ < 2) {
    throw InsufficientSamplesError("MomentAccumulator: need at least 2 samples, got " +
                                   std::to_string(count_));
  }
  MomentEstimate out;
  out.sample_count = count_;
  out.mean = mean_;
  Matrix cov = scatter_ / static_cast<double>(count_);
  out.covariance = 0.5 * (cov + cov.transpose());
  return out;
}

Matrix zca_matrix(const MomentEstimate& moments, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("zca_matrix: epsilon must be finite and >= 0");
  }
  return zca_matrix(sym_eig(moments.covariance), epsilon);
}

Matrix zca_matrix(const EigenDecomposition& spectrum, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("zca_matrix: epsilon must be finite and >= 0");
  }
  const Eigen::Index n = spectrum.eigenvalues.size();
  if (n == 0) return Matrix(0, 0);
  const double top = spectrum.eigenvalues.maxCoeff();
  const double bottom = spectrum.eigenvalues.minCoeff();
  if (epsilon == 0.0 && (top <= 0.0 || bottom <= 1e-12 * top)) {
    throw SingularityError(
        "zca_matrix: covariance is numerically singular (lambda_min = " + std::to_string(bottom) +
        ", lambda_max = " + std::to_string(top) + "); use a positive epsilon");
  }
  Matrix u(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lambda = std::max(spectrum.eigenvalues(k), 0.0);
    u.row(k) = spectrum.eigenvectors.col(k).transpose() / std::sqrt(lambda + epsilon);
  }
  return u;
}

double condition_number(const Vector& eigenvalues, double relative_floor) {
  if (eigenvalues.size() == 0) throw ValidationError("condition_number: empty spectrum");
  const double top = eigenvalues.maxCoeff();
  if (!(top > 0.0) || !std::isfinite(top)) {
    throw ValidationError("condition_number: degenerate spectrum (no positive eigenvalue)");
  }
  const double bottom = std::max(eigenvalues.minCoeff(), relative_floor * top);
  return top / bottom;
}

double condition_number(const EigenDecomposition& spectrum, double relative_floor) {
  return condition_number(spectrum.eigenvalues, relative_floor);
}

Matrix invert_whitening(const Matrix& u) {
  require_square(u, "invert_whitening");
  const Eigen::Index n = u.rows();
  if (n == 0) return Matrix(0, 0);
  const Matrix gram = u * u.transpose();
  const Vector diag = gram.diagonal();
  const double top = diag.maxCoeff();
  double off = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) off = std::max(off, std::abs(gram(i, j)) / std::sqrt(diag(i) * diag(j)));
    }
  }
  if (diag.minCoeff() > 0.0 && top > 0.0 && off <= 1e-12) {
    return u.transpose() * diag.cwiseInverse().asDiagonal();
  }
  Eigen::FullPivLU<Matrix> lu(u);
  if (!lu.isInvertible()) throw SingularityError("invert_whitening: matrix is singular");
  return lu.inverse();
}

}  // namespace prong::linalg
