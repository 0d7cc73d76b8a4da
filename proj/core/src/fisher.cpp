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

#include "prong/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <string>

#include "prong/errors.hpp"

namespace prong::fisher {

std::string_view to_string(BlockKind kind) {
  return kind == BlockKind::exact ? "exact" : "factorized";
}

FisherBlock::FisherBlock(std::size_t layer, BlockKind kind, Matrix matrix,
                         std::optional<KroneckerFactors> factors)
    : layer_(layer), kind_(kind), matrix_(std::move(matrix)), factors_(std::move(factors)) {}

const linalg::EigenDecomposition& FisherBlock::spectrum() const {
  if (!spectrum_) {
    spectrum_ = factors_ ? kronecker_spectrum(*factors_) : linalg::sym_eig(matrix_);
  }
  return *spectrum_;
}

namespace {

void check_layer(const ModelView& model, std::size_t layer) {
  if (layer >= model.spec.depth()) {
    throw DimensionError("fisher: layer " + std::to_string(layer) + " out of range (depth " +
                         std::to_string(model.spec.depth()) + ")");
  }
}

std::size_t block_side(const ModelView& model, std::size_t layer) {
  return model.spec.layers[layer].in_dim * model.spec.layers[layer].out_dim;
}

void check_block_size(const ModelView& model, std::size_t layer) {
  const std::size_t side = block_side(model, layer);
  if (side > kMaxBlockDim) {
    throw TooLargeError("fisher: block of layer " + std::to_string(layer) + " has side " +
                        std::to_string(side) + " > " + std::to_string(kMaxBlockDim));
  }
}

// dlog p(y|x)/dz_layer for every class y, each row scaled by sqrt(p(y|x)),
// so that sum_y D_y^T D_y / batch is the exact expectation over y.
std::vector<Matrix> weighted_class_deltas(const ModelView& model, const ForwardTrace& trace,
                                          std::size_t layer) {
  const Matrix& p = trace.output();
  const Activation head = model.spec.head();
  std::vector<Matrix> deltas;
  if (head == Activation::sigmoid) {
    if (p.cols() != 1) {
      throw ValidationError("fisher: a sigmoid head must have exactly one unit");
    }
    const Eigen::ArrayXd prob = p.col(0).array();
    deltas.emplace_back(Matrix((prob.sqrt() * (1.0 - prob)).matrix()));   // y = 1
    deltas.emplace_back(Matrix((-(1.0 - prob).sqrt() * prob).matrix()));  // y = 0
  } else if (head == Activation::softmax) {
    if (static_cast<std::size_t>(p.cols()) > kMaxClasses) {
      throw ValidationError("fisher: softmax heads are limited to " +
                            std::to_string(kMaxClasses) + " classes");
    }
    for (Eigen::Index y = 0; y < p.cols(); ++y) {
      Matrix d = -p;
      d.col(y).array() += 1.0;
      d = (d.array().colwise() * p.col(y).array().sqrt()).matrix();
      deltas.push_back(std::move(d));
    }
  } else {
    throw ValidationError("fisher: the output head must be sigmoid or softmax, not " +
                          std::string(to_string(head)));
  }

  const std::size_t last = model.spec.depth() - 1;
  for (auto& d : deltas) {
    for (std::size_t j = last; j > layer; --j) {
      Matrix grad_post = d * model.layers[j].weight;
      if (model.whitening != nullptr) grad_post = grad_post * model.whitening->layers[j].u;
      d = activation_backward(grad_post, model.spec.layers[j - 1].activation, trace.pre[j - 1],
                              trace.post[j - 1]);
    }
  }
  return deltas;
}

}  // namespace

FisherBlock exact_fisher_block(const ModelView& model, const Matrix& inputs, std::size_t layer) {
  check_layer(model, layer);
  check_block_size(model, layer);
  if (inputs.rows() == 0) throw InsufficientSamplesError("fisher: no inputs");
  const ForwardTrace trace = model.forward(inputs);
  const std::vector<Matrix> deltas = weighted_class_deltas(model, trace, layer);
  const Matrix& in = trace.layer_inputs[layer];
  const Eigen::Index out_dim = static_cast<Eigen::Index>(model.spec.layers[layer].out_dim);
  const Eigen::Index in_dim = in.cols();
  const Eigen::Index side = out_dim * in_dim;

  Matrix f = Matrix::Zero(side, side);
  Matrix g(inputs.rows(), side);
  for (const Matrix& d : deltas) {
    for (Eigen::Index x = 0; x < inputs.rows(); ++x) {
      for (Eigen::Index k = 0; k < out_dim; ++k) {
        g.row(x).segment(k * in_dim, in_dim) = d(x, k) * in.row(x);
      }
    }
    f.noalias() += g.transpose() * g;
  }
  f /= static_cast<double>(inputs.rows());
  f = 0.5 * (f + f.transpose()).eval();
  return FisherBlock(layer, BlockKind::exact, std::move(f));
}

KroneckerFactors kronecker_factors(const ModelView& model, const Matrix& inputs, std::size_t layer) {
  check_layer(model, layer);
  if (inputs.rows() == 0) throw InsufficientSamplesError("fisher: no inputs");
  const ForwardTrace trace = model.forward(inputs);
  const std::vector<Matrix> deltas = weighted_class_deltas(model, trace, layer);
  const double n = static_cast<double>(inputs.rows());
  const auto out_dim = static_cast<Eigen::Index>(model.spec.layers[layer].out_dim);
  KroneckerFactors f;
  f.delta_cov = Matrix::Zero(out_dim, out_dim);
  for (const Matrix& d : deltas) f.delta_cov.noalias() += d.transpose() * d;
  f.delta_cov /= n;
  f.delta_cov = 0.5 * (f.delta_cov + f.delta_cov.transpose()).eval();
  const Matrix& in = trace.layer_inputs[layer];
  f.act_cov = in.transpose() * in / n;
  f.act_cov = 0.5 * (f.act_cov + f.act_cov.transpose()).eval();
  return f;
}

Matrix kronecker_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

std::pair<KroneckerFactors, FisherBlock> factorized_fisher_block(const ModelView& model,
                                                                 const Matrix& inputs,
                                                                 std::size_t layer) {
  check_layer(model, layer);
  check_block_size(model, layer);
  KroneckerFactors f = kronecker_factors(model, inputs, layer);
  Matrix block = kronecker_product(f.delta_cov, f.act_cov);
  FisherBlock fb(layer, BlockKind::factorized, std::move(block), f);
  return {std::move(f), std::move(fb)};
}

linalg::EigenDecomposition kronecker_spectrum(const KroneckerFactors& factors) {
  const linalg::EigenDecomposition d = linalg::sym_eig(factors.delta_cov);
  const linalg::EigenDecomposition a = linalg::sym_eig(factors.act_cov);
  const Eigen::Index nd = d.eigenvalues.size();
  const Eigen::Index na = a.eigenvalues.size();
  const Eigen::Index side = nd * na;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(side));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto value = [&](Eigen::Index idx) { return d.eigenvalues(idx / na) * a.eigenvalues(idx % na); };
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index l, Eigen::Index r) { return value(l) > value(r); });

  linalg::EigenDecomposition out;
  out.eigenvalues.resize(side);
  out.eigenvectors.resize(side, side);
  for (Eigen::Index k = 0; k < side; ++k) {
    const Eigen::Index idx = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = value(idx);
    const auto u = d.eigenvectors.col(idx / na);
    const auto v = a.eigenvectors.col(idx % na);
    for (Eigen::Index i = 0; i < nd; ++i) out.eigenvectors.col(k).segment(i * na, na) = u(i) * v;
  }
  return out;
}

BlockConditioning conditioning_of(const Vector& eigenvalues, double relative_floor) {
  BlockConditioning c;
  if (eigenvalues.size() == 0) {
    c.degenerate = true;
    return c;
  }
  c.lambda_max = eigenvalues.maxCoeff();
  if (!(c.lambda_max > 0.0) || !std::isfinite(c.lambda_max)) {
    c.degenerate = true;
    c.lambda_min = eigenvalues.minCoeff();
    c.cond = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  c.lambda_min = std::max(eigenvalues.minCoeff(), relative_floor * c.lambda_max);
  c.cond = c.lambda_max / c.lambda_min;
  return c;
}

BlockConditioning block_conditioning(const FisherBlock& block) {
  if (block.factors()) return factorized_conditioning(*block.factors());
  return conditioning_of(block.spectrum().eigenvalues);
}

BlockConditioning factorized_conditioning(const KroneckerFactors& factors) {
  const BlockConditioning d = conditioning_of(linalg::sym_eig(factors.delta_cov).eigenvalues);
  const BlockConditioning a = conditioning_of(linalg::sym_eig(factors.act_cov).eigenvalues);
  BlockConditioning c;
  c.degenerate = d.degenerate || a.degenerate;
  c.lambda_max = d.lambda_max * a.lambda_max;
  c.lambda_min = d.lambda_min * a.lambda_min;
  c.cond = c.degenerate ? std::numeric_limits<double>::quiet_NaN() : d.cond * a.cond;
  return c;
}

std::vector<ConditioningRow> conditioning_report(const ModelView& model, const Matrix& inputs,
                                                 const std::vector<std::size_t>& layers,
                                                 const std::vector<BlockKind>& kinds,
                                                 std::size_t step,
                                                 const std::vector<ConditioningRow>* baseline) {
  std::vector<ConditioningRow> rows;
  for (std::size_t layer : layers) {
    for (BlockKind kind : kinds) {
      const BlockConditioning c =
          kind == BlockKind::exact
              ? block_conditioning(exact_fisher_block(model, inputs, layer))
              : factorized_conditioning(kronecker_factors(model, inputs, layer));
      ConditioningRow row;
      row.step = step;
      row.layer = layer;
      row.kind = kind;
      row.lambda_max = c.lambda_max;
      row.lambda_min = c.lambda_min;
      row.cond = c.cond;
      row.degenerate = c.degenerate;
      row.cond_ratio_to_initial = c.degenerate ? std::numeric_limits<double>::quiet_NaN() : 1.0;
      if (baseline != nullptr && !c.degenerate) {
        for (const auto& b : *baseline) {
          if (b.layer == layer && b.kind == kind) {
            row.cond_ratio_to_initial =
                b.degenerate ? std::numeric_limits<double>::quiet_NaN() : c.cond / b.cond;
          }
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ConditioningRow> ConditioningTracker::measure(const ModelView& model,
                                                          const Matrix& inputs, std::size_t step) {
  std::vector<ConditioningRow> rows =
      conditioning_report(model, inputs, layers_, kinds_, step, baseline_ ? &*baseline_ : nullptr);
  if (!baseline_) baseline_ = rows;
  history_.insert(history_.end(), rows.begin(), rows.end());
  return rows;
}

void write_conditioning_csv(std::ostream& out, const std::vector<ConditioningRow>& rows,
                            bool header) {
  if (header) out << "step,layer,kind,lambda_max,lambda_min,cond,cond_ratio_to_initial\n";
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.step << ',' << r.layer << ',' << to_string(r.kind) << ',' << r.lambda_max << ','
        << r.lambda_min << ',' << r.cond << ',' << r.cond_ratio_to_initial << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace prong::fisher
