#include <benchmark/benchmark.h>

#include "rampage/fields.hpp"
#include "rampage/harness.hpp"
#include "rampage/integration.hpp"
#include "rampage/solvers.hpp"

using namespace rampage;

namespace {

void BM_RunBatch(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const FieldSpec field = FieldSpec::rotational_game(10);
  SolverConfig cfg;
  cfg.method = Method::RAMPAGE_PLUS;
  cfg.schedule = StepSizeSchedule::constant(0.05);
  cfg.max_iters = 2000;
  cfg.seed = 1;
  const Vector theta0 = default_theta0(field);
  for (auto _ : state) {
    auto traces = run_batch(field, cfg, theta0, field.known_root(), 32, parallel);
    benchmark::DoNotOptimize(traces.data());
  }
  state.SetItemsProcessed(state.iterations() * 32 * cfg.max_iters);
  state.SetLabel(parallel ? "openmp" : "serial");
}
BENCHMARK(BM_RunBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EstimatorStats(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  const FieldSpec field = FieldSpec::polynomial10();
  const Vector theta = Vector::Constant(field.dimension(), 0.25);
  const std::int64_t samples = 1 << 16;
  for (auto _ : state) {
    const RandomStream rng(3, 0);
    EstimatorStats s = parallel ? estimator_stats(field, theta, 0.05, Estimator::RAMPAGE_PLUS, samples, rng)
                                : estimator_stats_serial(field, theta, 0.05, Estimator::RAMPAGE_PLUS, samples, rng);
    benchmark::DoNotOptimize(s.variance);
  }
  state.SetItemsProcessed(state.iterations() * samples);
  state.SetLabel(parallel ? "openmp" : "serial");
}
BENCHMARK(BM_EstimatorStats)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
