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

#ifndef PRONG_FISHER_HPP
#define PRONG_FISHER_HPP

#include <cstddef>
#include <optional>
#include <ostream>
#include <string_view>
#include <utility>
#include <vector>

#include "prong/linalg.hpp"
#include "prong/net.hpp"

namespace prong::fisher {

enum class BlockKind { exact, factorized };

std::string_view to_string(BlockKind kind);

// Largest block side (out_dim * in_dim of the layer) that is materialized.
constexpr std::size_t kMaxBlockDim = 2000;
// Largest softmax head for which the expectation over y is enumerated.
constexpr std::size_t kMaxClasses = 10;

// E[delta delta^T] (out x out) and E[in in^T] (in x in) for one layer, where
// `in` is the input to the layer's affine map (h in the canonical
// parametrization, the whitened a in the whitened one).
struct KroneckerFactors {
  Matrix delta_cov;
  Matrix act_cov;
};

// Fisher block of one layer's weights. Rows and columns are indexed by the
// row-major vectorization of the weight matrix: index k * in_dim + m refers
// to W(k, m).
class FisherBlock {
 public:
  FisherBlock(std::size_t layer, BlockKind kind, Matrix matrix,
              std::optional<KroneckerFactors> factors = std::nullopt);

  std::size_t layer() const { return layer_; }
  BlockKind kind() const { return kind_; }
  const Matrix& matrix() const { return matrix_; }
  const std::optional<KroneckerFactors>& factors() const { return factors_; }

  // Computed on first use: Jacobi on the dense block for exact blocks, the
  // Kronecker structure of the factors for factorized ones.
  const linalg::EigenDecomposition& spectrum() const;

 private:
  std::size_t layer_;
  BlockKind kind_;
  Matrix matrix_;
  std::optional<KroneckerFactors> factors_;
  mutable std::optional<linalg::EigenDecomposition> spectrum_;
};

/// F = E_x E_{y ~ p(y|x)} [vec(delta g^T) vec(delta g^T)^T] for the weights of
/// `layer`, with the expectation over y taken exactly by enumerating the
/// classes of a sigmoid (single unit) or softmax (<= 10 units) head, and the
/// expectation over x as the mean over the rows of `inputs`.
///
/// Throws TooLargeError when the block side exceeds kMaxBlockDim and
/// ValidationError for an unsupported head.
FisherBlock exact_fisher_block(const ModelView& model, const Matrix& inputs, std::size_t layer);

/// Both Kronecker factors under the same exact enumeration over y.
KroneckerFactors kronecker_factors(const ModelView& model, const Matrix& inputs, std::size_t layer);

/// The factors and their Kronecker product F(km, ln) = delta_cov(k, l) * act_cov(m, n).
std::pair<KroneckerFactors, FisherBlock> factorized_fisher_block(const ModelView& model,
                                                                 const Matrix& inputs,
                                                                 std::size_t layer);

Matrix kronecker_product(const Matrix& a, const Matrix& b);

/// Eigenpairs of delta_cov (x) act_cov from the eigenpairs of the factors.
linalg::EigenDecomposition kronecker_spectrum(const KroneckerFactors& factors);

struct BlockConditioning {
  double lambda_max = 0.0;
  double lambda_min = 0.0;  // after flooring
  double cond = 0.0;
  bool degenerate = false;
};

BlockConditioning conditioning_of(const Vector& eigenvalues, double relative_floor = 1e-12);

// Eigenvalues only; factorized blocks never materialize the product.
// For a Kronecker product the floor is applied to each factor, so
// cond = cond(delta_cov) * cond(act_cov).
BlockConditioning block_conditioning(const FisherBlock& block);
BlockConditioning factorized_conditioning(const KroneckerFactors& factors);

struct ConditioningRow {
  std::size_t step = 0;
  std::size_t layer = 0;
  BlockKind kind = BlockKind::factorized;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double cond = 0.0;
  double cond_ratio_to_initial = 1.0;
  bool degenerate = false;
};

/// Condition numbers of the requested blocks at `step`. Ratios are taken
/// against the matching (layer, kind) row of `baseline`; without a baseline
/// the rows themselves are the reference (ratio 1). Degenerate spectra are
/// flagged instead of thrown.
std::vector<ConditioningRow> conditioning_report(const ModelView& model, const Matrix& inputs,
                                                 const std::vector<std::size_t>& layers,
                                                 const std::vector<BlockKind>& kinds,
                                                 std::size_t step,
                                                 const std::vector<ConditioningRow>* baseline);

// Tracks a baseline measured at the first call (or set explicitly, e.g.
// before the first whitening reparametrization) and reports ratios to it.
class ConditioningTracker {
 public:
  ConditioningTracker(std::vector<std::size_t> layers, std::vector<BlockKind> kinds)
      : layers_(std::move(layers)), kinds_(std::move(kinds)) {}

  std::vector<ConditioningRow> measure(const ModelView& model, const Matrix& inputs,
                                       std::size_t step);
  void set_baseline(std::vector<ConditioningRow> rows) { baseline_ = std::move(rows); }
  bool has_baseline() const { return baseline_.has_value(); }
  const std::vector<ConditioningRow>& rows() const { return history_; }

 private:
  std::vector<std::size_t> layers_;
  std::vector<BlockKind> kinds_;
  std::optional<std::vector<ConditioningRow>> baseline_;
  std::vector<ConditioningRow> history_;
};

// CSV with header: step,layer,kind,lambda_max,lambda_min,cond,cond_ratio_to_initial
void write_conditioning_csv(std::ostream& out, const std::vector<ConditioningRow>& rows,
                            bool header = true);

}  // namespace prong::fisher

#endif  // PRONG_FISHER_HPP
