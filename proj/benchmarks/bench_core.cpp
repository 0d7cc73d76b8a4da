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

#include <benchmark/benchmark.h>

#include <vector>

#include "prong/data.hpp"
#include "prong/fisher.hpp"
#include "prong/linalg.hpp"
#include "prong/net.hpp"
#include "prong/prong.hpp"
#include "prong/random.hpp"

namespace prong {
namespace {

Matrix random_rows(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

NetworkSpec desk_autoencoder() {
  return NetworkSpec::chain({100, 200, 100, 50, 16, 50, 100, 200, 100},
                            std::vector<Activation>(8, Activation::sigmoid));
}

void BM_SymEig(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Matrix x = random_rows(2 * n, n, 1);
  const Matrix cov = x.transpose() * x / static_cast<double>(2 * n);
  for (auto _ : state) benchmark::DoNotOptimize(linalg::sym_eig(cov));
}
BENCHMARK(BM_SymEig)->Arg(16)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const NetworkSpec spec = desk_autoencoder();
  WhitenedModel m = WhitenedModel::from_canonical(spec, init_fan_in(spec, 1));
  const Matrix x = (random_rows(128, 100, 2).array() * 0.2 + 0.5).matrix();
  const bool whitened = state.range(0) != 0;
  if (whitened) prong_reparametrize(m, (random_rows(300, 100, 3).array() * 0.2 + 0.5).matrix(), 0.01);
  const CanonicalParams theta = m.canonical();
  for (auto _ : state) {
    const ModelView mv = whitened ? m.view() : view(spec, theta);
    const ForwardTrace t = mv.forward(x);
    benchmark::DoNotOptimize(
        backward_from_output_delta(t, mv, output_delta(LossKind::squared_error, t, spec, x)));
  }
  state.SetLabel(whitened ? "whitened" : "canonical");
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Reparametrize(benchmark::State& state) {
  const NetworkSpec spec = desk_autoencoder();
  const WhitenedModel start = WhitenedModel::from_canonical(spec, init_fan_in(spec, 1));
  const Matrix stats = (random_rows(state.range(0), 100, 4).array() * 0.2 + 0.5).matrix();
  for (auto _ : state) {
    WhitenedModel m = start;
    benchmark::DoNotOptimize(prong_reparametrize(m, stats, 0.01));
  }
}
BENCHMARK(BM_Reparametrize)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FactorizedFisher(benchmark::State& state) {
  const NetworkSpec spec =
      NetworkSpec::chain({100, 32, 32, 1}, {Activation::tanh, Activation::tanh, Activation::sigmoid});
  const CanonicalParams theta = init_fan_in(spec, 5);
  const Matrix x = random_rows(500, 100, 6);
  for (auto _ : state) {
    const auto factors = fisher::kronecker_factors(view(spec, theta), x, 1);
    benchmark::DoNotOptimize(fisher::factorized_conditioning(factors));
  }
}
BENCHMARK(BM_FactorizedFisher)->Unit(benchmark::kMillisecond);

void BM_ExactFisher(benchmark::State& state) {
  const NetworkSpec spec =
      NetworkSpec::chain({20, 16, 1}, {Activation::tanh, Activation::sigmoid});
  const CanonicalParams theta = init_fan_in(spec, 7);
  const Matrix x = random_rows(200, 20, 8);
  for (auto _ : state) {
    const fisher::FisherBlock f = fisher::exact_fisher_block(view(spec, theta), x, 0);
    benchmark::DoNotOptimize(f.spectrum());
  }
}
BENCHMARK(BM_ExactFisher)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace prong

BENCHMARK_MAIN();
