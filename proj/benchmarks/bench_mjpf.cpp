#include "trajsa/learner.hpp"
#include "trajsa/mjpf.hpp"
#include "trajsa/simulator.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace trajsa;

const ModelBank& perimeter_bank() {
  static const ModelBank bank = fit_normality(generate(ScenarioSpec{}).observations, FitConfig{}).bank;
  return bank;
}

void BM_MjpfStep(benchmark::State& state) {
  const ModelBank& bank = perimeter_bank();
  ScenarioSpec spec;
  spec.kind = ScenarioKind::UTurn;
  const auto series = generate(spec).observations;
  MjpfConfig cfg;
  cfg.n_particles = static_cast<std::size_t>(state.range(0));
  ParticleSet ps = mjpf_init(bank, series.front(), cfg);
  std::size_t k = 1;
  for (auto _ : state) {
    if (k == series.size()) {
      state.PauseTiming();
      ps = mjpf_init(bank, series.front(), cfg);
      k = 1;
      state.ResumeTiming();
    }
    predict_step(ps, bank, step_dt(series[k - 1].t, series[k].t, bank.noise.dt_default));
    benchmark::DoNotOptimize(update_step(ps, series[k], bank, cfg));
    ++k;
  }
}
BENCHMARK(BM_MjpfStep)->Arg(5)->Arg(25)->Arg(50)->Arg(200);

void BM_FitNormality(benchmark::State& state) {
  const auto series = generate(ScenarioSpec{}).observations;
  for (auto _ : state) benchmark::DoNotOptimize(fit_normality(series, FitConfig{}));
}
BENCHMARK(BM_FitNormality)->Unit(benchmark::kMillisecond);

}  // namespace
