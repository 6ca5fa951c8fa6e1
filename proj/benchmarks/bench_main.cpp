// Microbenchmarks for the hot paths: network generation, recruitment
// sampling, stationary weights, likelihood fitting, and cluster resampling.
// Fixtures are built once outside the timed loops.

#include <benchmark/benchmark.h>

#include <cstdint>

#include <rdsmdr/bootstrap.hpp>
#include <rdsmdr/estimators.hpp>
#include <rdsmdr/harness.hpp>
#include <rdsmdr/inference.hpp>
#include <rdsmdr/netgen.hpp>
#include <rdsmdr/recruitment.hpp>
#include <rdsmdr/rng.hpp>
#include <rdsmdr/sampler.hpp>

namespace {

using namespace rdsmdr;

const Population& bench_population() {
  static const Population pop =
      draw_population(scenario_recipe(Level::moderate, 1000), RngStream(1));
  return pop;
}

const RDSSample& bench_sample() {
  static const RDSSample sample = [] {
    SamplingDesign design;
    return run_rds(bench_population(), scenario_mdr_model(Level::moderate), design,
                   RngStream(2));
  }();
  return sample;
}

void BM_DrawPopulation(benchmark::State& state) {
  const auto recipe = scenario_recipe(Level::none, 1000);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(draw_population(recipe, RngStream(++seed)));
}
BENCHMARK(BM_DrawPopulation)->Unit(benchmark::kMillisecond);

void BM_RunRds(benchmark::State& state) {
  const auto& pop = bench_population();
  const auto model = scenario_mdr_model(Level::moderate);
  const SamplingDesign design;
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_rds(pop, model, design, RngStream(++seed)));
}
BENCHMARK(BM_RunRds)->Unit(benchmark::kMillisecond);

void BM_StationaryWeights(benchmark::State& state) {
  const auto& pop = bench_population();
  const auto model = scenario_mdr_model(Level::moderate);
  for (auto _ : state) benchmark::DoNotOptimize(stationary(pop, model));
}
BENCHMARK(BM_StationaryWeights)->Unit(benchmark::kMillisecond);

void BM_FitMdr(benchmark::State& state) {
  const auto& sample = bench_sample();
  const auto covs = scenario_covariates();
  for (auto _ : state) benchmark::DoNotOptimize(fit_mdr(sample, covs));
}
BENCHMARK(BM_FitMdr)->Unit(benchmark::kMillisecond);

void BM_MdrEgoEstimate(benchmark::State& state) {
  const auto& sample = bench_sample();
  const auto covs = scenario_covariates();
  const auto fit = fit_mdr(sample, covs);
  for (auto _ : state) benchmark::DoNotOptimize(mdr_ego(sample, fit, covs));
}
BENCHMARK(BM_MdrEgoEstimate);

void BM_NbFixedReplicate(benchmark::State& state) {
  const auto& sample = bench_sample();
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(nb_fixed_replicate(sample, RngStream(++seed)));
}
BENCHMARK(BM_NbFixedReplicate);

}  // namespace

BENCHMARK_MAIN();
