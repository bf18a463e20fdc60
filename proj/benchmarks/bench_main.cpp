#include <benchmark/benchmark.h>

#include <fnmiss/bands.hpp>
#include <fnmiss/estimators.hpp>
#include <fnmiss/nuisance.hpp>
#include <fnmiss/simulation.hpp>

namespace {

using namespace fnmiss;

Dataset simulated(Eigen::Index n, Eigen::Index T) {
  SimConfig cfg;
  cfg.n = n;
  cfg.T = T;
  cfg.calibrate_missingness = true;
  const StudyContext ctx = StudyContext::make(cfg);
  Rng rng(7);
  return gen_dataset(cfg, ctx, rng).dataset;
}

void BM_FitOls(benchmark::State& state) {
  const Dataset ds = simulated(state.range(0), 50);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ols(ds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitOls)->Arg(250)->Arg(1000)->Arg(3000);

void BM_FitLogistic(benchmark::State& state) {
  const Dataset ds = simulated(state.range(0), 50);
  for (auto _ : state) benchmark::DoNotOptimize(fit_logistic(ds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitLogistic)->Arg(250)->Arg(1000)->Arg(3000);

void BM_EstimateDR(benchmark::State& state) {
  const Dataset ds = simulated(state.range(0), 50);
  const OutcomeModel om = fit_ols(ds);
  const PropensityModel pm = fit_logistic(ds);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_dr(ds, om, pm));
}
BENCHMARK(BM_EstimateDR)->Arg(250)->Arg(3000);

void BM_CriticalConstant(benchmark::State& state) {
  double kappa = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(critical_constant(kappa, 0.05));
    kappa = kappa < 50.0 ? kappa + 0.5 : 1.0;
  }
}
BENCHMARK(BM_CriticalConstant);

void BM_ScbFromEstimate(benchmark::State& state) {
  const Dataset ds = simulated(1000, state.range(0));
  const OutcomeModel om = fit_ols(ds);
  const MeanEstimate est = estimate_or(ds, om);
  for (auto _ : state) benchmark::DoNotOptimize(build_scb(est, 0.05));
}
BENCHMARK(BM_ScbFromEstimate)->Arg(50)->Arg(200);

void BM_Replicate(benchmark::State& state) {
  SimConfig cfg;
  cfg.n = state.range(0);
  cfg.calibrate_missingness = true;
  cfg.error_kind = state.range(1) == 0 ? ErrorKind::MaternGaussian : ErrorKind::MultivariateT;
  const StudyContext ctx = StudyContext::make(cfg);
  int index = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_replication(cfg, ctx, replicate_seed(cfg, index++)));
}
BENCHMARK(BM_Replicate)->Args({250, 0})->Args({3000, 0})->Args({3000, 1})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
