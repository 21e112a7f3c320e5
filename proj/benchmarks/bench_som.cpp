#include "trajsa/som.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace trajsa;

void BM_SomTrain(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<AgentState> samples;
  for (int i = 0; i < state.range(0); ++i) samples.push_back(make_state(g(rng), g(rng), g(rng), g(rng)));
  SomConfig cfg;
  cfg.rows = 6;
  cfg.cols = 6;
  cfg.epochs = 50;
  for (auto _ : state) benchmark::DoNotOptimize(som_train(samples, cfg));
}
BENCHMARK(BM_SomTrain)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
