// Timings for the dense simplex, branch-and-bound on complementarity
// pairs, and a full optimistic and pessimistic tune on Cancer splits.

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "bltune/bilevel.hpp"
#include "bltune/dataset.hpp"
#include "bltune/lp.hpp"
#include "bltune/mip.hpp"

namespace {

using namespace bltune;

// Feasible by construction: every row holds at a random interior point.
LinearProgram random_lp(std::size_t vars, std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LinearProgram lp;
  std::vector<double> point(vars);
  for (std::size_t j = 0; j < vars; ++j) {
    lp.objective.push_back(u(rng));
    lp.bounds.push_back({0.0, 10.0});
    point[j] = 5.0 + 4.0 * u(rng);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    Constraint c;
    double at = 0.0;
    for (std::size_t j = 0; j < vars; ++j) {
      c.coefficients.push_back(u(rng));
      at += c.coefficients.back() * point[j];
    }
    c.rhs = at + 0.5 + 0.5 * u(rng);
    lp.rows.push_back(c);
  }
  return lp;
}

// Pairs x_2k * x_{2k+1} = 0 over a random LP.
MipProblem random_pairs(std::size_t pairs, std::uint64_t seed) {
  MipProblem p;
  p.base = random_lp(2 * pairs, pairs, seed);
  for (auto& c : p.base.objective) c = -std::abs(c);
  for (std::size_t k = 0; k < pairs; ++k) {
    ComplementarityPair pair;
    pair.p = AffineExpr::variable(2 * k);
    pair.q = AffineExpr::variable(2 * k + 1);
    pair.big_m = 10.0;
    pair.big_m_q = 10.0;
    add_complementarity(p, pair);
  }
  return p;
}

struct Split {
  LabeledDataset train;
  LabeledDataset val;
};

Split cancer_split(std::size_t train, std::size_t val, std::uint64_t seed) {
  static const LabeledDataset data = standardize(load_csv(BLTUNE_DATA_DIR "/cancer.csv", "class", "malignant"));
  const SplitSpec s = stratified_split(data, train, val, 0.5, seed);
  return {data.subset(s.train_idx), data.subset(s.val_idx)};
}

void BM_SimplexDense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const LinearProgram lp = random_lp(n, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lp(lp));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SimplexDense)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_ComplementarityBranchAndBound(benchmark::State& state) {
  const MipProblem p = random_pairs(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(solve_mip(p));
}
BENCHMARK(BM_ComplementarityBranchAndBound)->DenseRange(4, 16, 4);

void BM_OptimisticCancer(benchmark::State& state) {
  const auto t = static_cast<std::size_t>(state.range(0));
  const Split s = cancer_split(t, 10, 0);
  const HyperBounds bounds = HyperBounds::uniform(s.train.num_features, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_optimistic(s.train, s.val, bounds));
}
BENCHMARK(BM_OptimisticCancer)->Arg(5)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_TuneCancer(benchmark::State& state) {
  const Split s = cancer_split(static_cast<std::size_t>(state.range(0)), 10, 0);
  const HyperBounds bounds = HyperBounds::uniform(s.train.num_features, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(tune(s.train, s.val, bounds, 0.0, FlipMode::All));
}
BENCHMARK(BM_TuneCancer)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
