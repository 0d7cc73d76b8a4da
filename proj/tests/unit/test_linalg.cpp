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

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "../support/oracles.hpp"
#include "prong/errors.hpp"
#include "prong/linalg.hpp"
#include "prong/random.hpp"

namespace prong {
namespace {

using linalg::max_abs;
using testing::random_spd;
using testing::random_symmetric;

TEST(SymEig, IdentityGivesUnitSpectrumAndIdentityVectors) {
  const auto e = linalg::sym_eig(Matrix::Identity(3, 3));
  EXPECT_EQ(e.eigenvalues, Vector::Ones(3));
  EXPECT_EQ(e.eigenvectors, Matrix::Identity(3, 3));
}

TEST(SymEig, DiagonalInputSortedDescending) {
  Matrix a(2, 2);
  a << 1, 0, 0, 4;
  const auto e = linalg::sym_eig(a);
  EXPECT_DOUBLE_EQ(e.eigenvalues(0), 4.0);
  EXPECT_DOUBLE_EQ(e.eigenvalues(1), 1.0);
  EXPECT_DOUBLE_EQ(std::abs(e.eigenvectors(1, 0)), 1.0);
  EXPECT_DOUBLE_EQ(std::abs(e.eigenvectors(0, 1)), 1.0);
}

TEST(SymEig, RandomReconstructionAndOrthonormality) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 9);
    const Matrix a = random_symmetric(n, seed);
    const auto e = linalg::sym_eig(a);
    const Matrix& u = e.eigenvectors;
    const Matrix rebuilt = u * e.eigenvalues.asDiagonal() * u.transpose();
    EXPECT_LT(max_abs(Matrix(rebuilt - a)), 1e-8 * max_abs(a)) << "seed " << seed;
    EXPECT_LT(max_abs(Matrix(u.transpose() * u - Matrix::Identity(n, n))), 1e-10);
    for (Eigen::Index k = 1; k < n; ++k) EXPECT_GE(e.eigenvalues(k - 1), e.eigenvalues(k));
  }
}

TEST(SymEig, EigenvaluesAgreeWithEigenSolver) {
  for (std::uint64_t seed = 30; seed < 35; ++seed) {
    const Matrix a = random_symmetric(12, seed);
    const auto e = linalg::sym_eig(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref{Eigen::MatrixXd(a)};
    const Eigen::VectorXd expected = ref.eigenvalues().reverse();
    EXPECT_LT((e.eigenvalues - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(SymEig, ColumnsAreSignNormalized) {
  const auto e = linalg::sym_eig(random_symmetric(6, 99));
  for (Eigen::Index k = 0; k < 6; ++k) {
    Eigen::Index arg = 0;
    e.eigenvectors.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(e.eigenvectors(arg, k), 0.0);
  }
}

TEST(SymEig, Deterministic) {
  const Matrix a = random_symmetric(9, 5);
  const auto e1 = linalg::sym_eig(a);
  const auto e2 = linalg::sym_eig(a);
  EXPECT_EQ(e1.eigenvalues, e2.eigenvalues);
  EXPECT_EQ(e1.eigenvectors, e2.eigenvectors);
}

TEST(SymEig, RejectsBadInput) {
  EXPECT_THROW(linalg::sym_eig(Matrix::Zero(2, 3)), DimensionError);
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  EXPECT_THROW(linalg::sym_eig(asym), ValidationError);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = std::nan("");
  EXPECT_THROW(linalg::sym_eig(bad), NumericError);
}

TEST(SymEig, SymmetrizesWithinTolerance) {
  Matrix a = random_symmetric(4, 8);
  a(0, 1) += 1e-12;
  const auto e = linalg::sym_eig(a);
  EXPECT_EQ(e.eigenvalues.size(), 4);
}

TEST(SymEig, SweepCapRaisesConvergenceError) {
  linalg::JacobiOptions opts;
  opts.max_sweeps = 1;
  EXPECT_THROW(linalg::sym_eig(random_symmetric(20, 3), opts), ConvergenceError);
}

TEST(EstimateMoments, ConstantSamplesHaveZeroCovariance) {
  Matrix rows(5, 3);
  for (int i = 0; i < 5; ++i) rows.row(i) << 1.5, -2.0, 0.25;
  const auto m = linalg::estimate_moments(rows);
  EXPECT_DOUBLE_EQ(m.mean(0), 1.5);
  EXPECT_DOUBLE_EQ(m.mean(1), -2.0);
  EXPECT_EQ(max_abs(m.covariance), 0.0);
  EXPECT_EQ(m.sample_count, 5u);
}

TEST(EstimateMoments, TwoPointHandExample) {
  std::vector<Vector> samples{Vector::Zero(2), Vector::Constant(2, 2.0)};
  const auto m = linalg::estimate_moments(samples);
  EXPECT_EQ(m.mean, Vector::Ones(2));
  EXPECT_EQ(m.covariance, Matrix::Ones(2, 2));
}

TEST(EstimateMoments, MonteCarloGaussian) {
  Matrix target(3, 3);
  target << 2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 0.5;
  Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(target)};
  const Eigen::MatrixXd l = llt.matrixL();
  Rng rng(2024);
  Matrix rows(10000, 3);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    rows.row(i) = (l * z).transpose();
  }
  const auto m = linalg::estimate_moments(rows);
  EXPECT_LT(max_abs(Matrix(m.covariance - target)), 0.1);
}

TEST(EstimateMoments, Errors) {
  EXPECT_THROW(linalg::estimate_moments(Matrix::Zero(1, 3)), InsufficientSamplesError);
  EXPECT_THROW(linalg::estimate_moments(Matrix::Zero(0, 3)), InsufficientSamplesError);
  std::vector<Vector> mixed{Vector::Zero(2), Vector::Zero(3)};
  EXPECT_THROW(linalg::estimate_moments(mixed), DimensionError);
}

TEST(MomentAccumulator, MergeMatchesDirectEstimate) {
  const Matrix rows = testing::random_matrix(40, 4, 17);
  const auto direct = linalg::estimate_moments(rows);
  linalg::MomentAccumulator a(4), b(4), c(4);
  a.add(rows.topRows(7));
  b.add(rows.middleRows(7, 20));
  c.add(rows.bottomRows(13));
  linalg::MomentAccumulator left = a;
  left.merge(b);
  left.merge(c);
  linalg::MomentAccumulator bc = b;
  bc.merge(c);
  linalg::MomentAccumulator right = a;
  right.merge(bc);
  const auto l = left.finish();
  const auto r = right.finish();
  EXPECT_EQ(l.sample_count, 40u);
  EXPECT_LT(max_abs(Vector(l.mean - direct.mean)), 1e-14);
  EXPECT_LT(max_abs(Matrix(l.covariance - direct.covariance)), 1e-14);
  EXPECT_LT(max_abs(Matrix(l.covariance - r.covariance)), 1e-14);
}

TEST(ZcaMatrix, IdentityCovariance) {
  linalg::MomentEstimate m{Vector::Zero(3), Matrix::Identity(3, 3), 10};
  const Matrix u = linalg::zca_matrix(m, 0.0);
  EXPECT_LT(max_abs(Matrix(u * u.transpose() - Matrix::Identity(3, 3))), 1e-12);
}

TEST(ZcaMatrix, DiagonalCovarianceWithAndWithoutEpsilon) {
  Matrix cov = Matrix::Zero(2, 2);
  cov(0, 0) = 4.0;
  cov(1, 1) = 1.0;
  linalg::MomentEstimate m{Vector::Zero(2), cov, 10};
  const Matrix u0 = linalg::zca_matrix(m, 0.0);
  EXPECT_NEAR(std::abs(u0(0, 0)), 0.5, 1e-15);
  EXPECT_NEAR(std::abs(u0(1, 1)), 1.0, 1e-15);
  EXPECT_EQ(u0(0, 1), 0.0);
  const Matrix u1 = linalg::zca_matrix(m, 1.0);
  EXPECT_NEAR(std::abs(u1(0, 0)), 1.0 / std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(std::abs(u1(1, 1)), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(ZcaMatrix, WhitensFullRankCovariance) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix cov = random_spd(6, seed);
    linalg::MomentEstimate m{Vector::Zero(6), cov, 100};
    const Matrix u = linalg::zca_matrix(m, 0.0);
    EXPECT_LT(max_abs(Matrix(u * cov * u.transpose() - Matrix::Identity(6, 6))), 1e-8);
  }
}

TEST(ZcaMatrix, SingularCovarianceNeedsEpsilon) {
  linalg::MomentEstimate m{Vector::Zero(2), Matrix::Ones(2, 2), 10};
  EXPECT_THROW(linalg::zca_matrix(m, 0.0), SingularityError);
  EXPECT_NO_THROW(linalg::zca_matrix(m, 0.1));
}

TEST(ZcaMatrix, WhitenedSamplesHaveZeroMeanAndUnitCovariance) {
  const Matrix mix = testing::random_matrix(5, 5, 3);
  const Matrix rows = testing::random_matrix(200, 5, 4) * mix + Matrix::Constant(200, 5, 0.7);
  const auto m = linalg::estimate_moments(rows);
  const Matrix u = linalg::zca_matrix(m, 0.0);
  const Matrix a = (rows.rowwise() - m.mean.transpose()) * u.transpose();
  const auto w = linalg::estimate_moments(a);
  EXPECT_LT(max_abs(w.mean), 1e-9);
  EXPECT_LT(max_abs(Matrix(w.covariance - Matrix::Identity(5, 5))), 1e-8);
}

TEST(ZcaMatrix, EpsilonShrinksEigenbasisCovariance) {
  const Matrix rows = testing::random_matrix(300, 4, 6) * testing::random_matrix(4, 4, 7);
  const auto m = linalg::estimate_moments(rows);
  const auto spectrum = linalg::sym_eig(m.covariance);
  const double eps = 0.05;
  const Matrix u = linalg::zca_matrix(spectrum, eps);
  const Matrix a = (rows.rowwise() - m.mean.transpose()) * u.transpose();
  const Matrix cov = linalg::estimate_moments(a).covariance;
  // Rows of U are the scaled eigenvectors, so cov(a) is diagonal already.
  Vector expected(4);
  for (int k = 0; k < 4; ++k) expected(k) = spectrum.eigenvalues(k) / (spectrum.eigenvalues(k) + eps);
  EXPECT_LT(max_abs(Matrix(cov - Matrix(expected.asDiagonal()))), 1e-8);
}

TEST(ConditionNumber, Examples) {
  EXPECT_DOUBLE_EQ(linalg::condition_number(Vector::Ones(4)), 1.0);
  Vector s(2);
  s << 100.0, 1.0;
  EXPECT_DOUBLE_EQ(linalg::condition_number(s), 100.0);
  EXPECT_DOUBLE_EQ(linalg::condition_number(Vector(37.5 * s)), 100.0);
  EXPECT_THROW(linalg::condition_number(Vector::Zero(3)), ValidationError);
}

TEST(ConditionNumber, FloorsTinyEigenvalues) {
  Vector s(3);
  s << 2.0, 1.0, 0.0;
  EXPECT_DOUBLE_EQ(linalg::condition_number(s), 1e12);
  EXPECT_DOUBLE_EQ(linalg::condition_number(s, 1e-3), 1e3);
}

TEST(ConditionNumber, ScaleInvariantOnRandomSpectra) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Vector s(5);
    for (int k = 0; k < 5; ++k) s(k) = rng.uniform(0.01, 10.0);
    const double scale = rng.uniform(1e-3, 1e3);
    EXPECT_NEAR(linalg::condition_number(s), linalg::condition_number(Vector(scale * s)),
                1e-12 * linalg::condition_number(s));
  }
}

TEST(InvertWhitening, Examples) {
  EXPECT_EQ(linalg::invert_whitening(Matrix::Identity(3, 3)), Matrix::Identity(3, 3));
  Matrix u = Matrix::Zero(2, 2);
  u(0, 0) = 0.5;
  u(1, 1) = 1.0;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 2.0;
  expected(1, 1) = 1.0;
  EXPECT_LT(max_abs(Matrix(linalg::invert_whitening(u) - expected)), 1e-15);
  EXPECT_THROW(linalg::invert_whitening(Matrix::Zero(2, 3)), DimensionError);
}

TEST(InvertWhitening, RandomZcaRoundTrip) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    linalg::MomentEstimate m{Vector::Zero(7), random_spd(7, seed, 0.01), 50};
    const Matrix u = linalg::zca_matrix(m, 1e-3);
    const Matrix inv = linalg::invert_whitening(u);
    EXPECT_LT(max_abs(Matrix(u * inv - Matrix::Identity(7, 7))), 1e-9);
  }
}

TEST(InvertWhitening, GeneralMatrixFallsBackToLu) {
  Matrix u(2, 2);
  u << 1.0, 2.0, 0.5, 3.0;
  EXPECT_LT(max_abs(Matrix(u * linalg::invert_whitening(u) - Matrix::Identity(2, 2))), 1e-12);
  EXPECT_THROW(linalg::invert_whitening(Matrix::Ones(2, 2)), SingularityError);
}

}  // namespace
}  // namespace prong
