#include "trajsa/kalman.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace trajsa;

void BM_WeightedDistance(benchmark::State& state) {
  const AgentState a = make_state(1.0, 2.0, 0.5, -0.3);
  const AgentState b = make_state(-0.4, 1.1, 0.2, 0.9);
  const DistanceWeights w{0.75, 0.25};
  for (auto _ : state) benchmark::DoNotOptimize(weighted_distance(a, b, w));
}
BENCHMARK(BM_WeightedDistance);

void BM_KalmanPredictUpdate(benchmark::State& state) {
  const NoiseParams n = NoiseParams::defaults();
  const MotionModel m = MotionModel::motivated(Vec2(1.0, 0.0), n.dt_default);
  GaussianBelief b;
  b.mean = make_state(0, 0, 1, 0);
  b.cov = n.q;
  Vec2 z(0.0, 0.0);
  for (auto _ : state) {
    z.x() += 0.11;
    b = update(predict(b, m, n), z, n).posterior;
    benchmark::DoNotOptimize(b);
  }
}
BENCHMARK(BM_KalmanPredictUpdate);

}  // namespace
