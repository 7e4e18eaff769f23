#include <benchmark/benchmark.h>

#include <cstddef>
#include <random>
#include <vector>

#include "concord/aggregates.hpp"
#include "concord/consensus.hpp"
#include "concord/evaluation.hpp"

using namespace concord;

namespace {

std::vector<consensus::LevelForecastInput> weekly_levels(std::size_t R) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> val(0.0, 2.0);
  std::uniform_real_distribution<double> sd(0.3, 2.0);

  auto make = [&](agg::AggregateSpec spec, double alpha) {
    consensus::LevelForecastInput input;
    const std::size_t horizon = R / spec.K;
    input.forecast.level = spec.name;
    input.forecast.mu.resize(horizon);
    input.forecast.sigma.resize(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
      input.forecast.mu[h] = val(rng);
      input.forecast.sigma[h] = sd(rng);
    }
    input.spec = std::move(spec);
    input.alpha = alpha;
    return input;
  };

  std::vector<consensus::LevelForecastInput> levels;
  levels.push_back(make(agg::make_spec(agg::Kind::base, 1), 1.0));
  levels.push_back(make(agg::make_spec(agg::Kind::average, 6), 10.0));
  levels.push_back(make(agg::make_spec(agg::Kind::average, 24), 10.0));
  levels.push_back(make(agg::make_spec(agg::Kind::trend, 24), 0.5));
  return levels;
}

void BM_BuildProblem(benchmark::State& state) {
  const std::size_t R = 168;
  const auto levels = weekly_levels(R);
  for (auto _ : state) {
    benchmark::DoNotOptimize(consensus::build_problem(levels, R, 4));
  }
}
BENCHMARK(BM_BuildProblem);

void BM_SolveMean(benchmark::State& state) {
  const std::size_t R = 168;
  const auto problem = consensus::build_problem(weekly_levels(R), R, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(consensus::solve_mean(problem));
  }
}
BENCHMARK(BM_SolveMean);

void BM_SolveCovariance(benchmark::State& state) {
  const std::size_t R = 168;
  const auto problem = consensus::build_problem(weekly_levels(R), R, 4);
  consensus::OptimizerConfig config;
  config.max_iterations = static_cast<std::size_t>(state.range(0));
  config.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(consensus::solve_covariance(problem, config));
  }
}
BENCHMARK(BM_SolveCovariance)->Arg(100)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Marginalize(benchmark::State& state) {
  const std::size_t R = 168;
  consensus::OptimizerConfig config;
  config.max_iterations = 500;
  const auto dist = consensus::reconcile(weekly_levels(R), R, 4, config);
  const auto weight = agg::pad_weight(agg::make_spec(agg::Kind::halfdiff, 24), 3, R);
  for (auto _ : state) {
    benchmark::DoNotOptimize(consensus::marginalize(dist, weight));
  }
}
BENCHMARK(BM_Marginalize);

void BM_CrpsGaussian(benchmark::State& state) {
  double y = -3.0;
  for (auto _ : state) {
    y += 0.01;
    if (y > 3.0) y = -3.0;
    benchmark::DoNotOptimize(eval::crps_gaussian(0.2, 1.3, y));
  }
}
BENCHMARK(BM_CrpsGaussian);

}  // namespace

BENCHMARK_MAIN();
