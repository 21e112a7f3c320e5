#pragma once

#include "trajsa/learner.hpp"
#include "trajsa/mjpf.hpp"
#include "trajsa/simulator.hpp"

#include <map>

namespace trajsa::testing_support {

/// Perimeter training run of the given seed, learned once per process, with
/// the detection threshold calibrated the same way the CLI does.
inline const FitResult& perimeter_fit(std::uint64_t seed) {
  static std::map<std::uint64_t, FitResult> cache;
  auto it = cache.find(seed);
  if (it == cache.end()) {
    ScenarioSpec spec;
    spec.seed = seed;
    const Scenario train = generate(spec);
    FitResult fit = fit_normality(train.observations, FitConfig{});
    MjpfConfig mc;
    mc.seed = seed;
    fit.bank.signal_threshold = calibrate_signal_threshold(fit.bank, train.observations, mc);
    it = cache.emplace(seed, std::move(fit)).first;
  }
  return it->second;
}

inline Scenario scenario(ScenarioKind kind, std::uint64_t seed, double noise = 0.05) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.noise_std = noise;
  return generate(spec);
}

}  // namespace trajsa::testing_support
