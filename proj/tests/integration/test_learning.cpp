#include "fixtures.hpp"
#include "trajsa/learner.hpp"
#include "trajsa/simulator.hpp"

#include <gtest/gtest.h>

#include <algorithm>

namespace trajsa {
namespace {

using testing_support::perimeter_fit;
using testing_support::scenario;

TEST(FitNormality, PerimeterLearnsOneModelAndConverges) {
  const FitResult& fit = perimeter_fit(1);
  EXPECT_TRUE(fit.converged);
  ASSERT_EQ(fit.bank.models.size(), 2u);
  EXPECT_LE(fit.learning_iterations, 3);
  EXPECT_LE(fit.unexplained_fraction, 0.01);
  EXPECT_NO_THROW(fit.bank.validate());
}

TEST(FitNormality, LearnedModelWinsOnPerimeter) {
  const FitResult& fit = perimeter_fit(1);
  const Scenario sc = scenario(ScenarioKind::Perimeter, 1);
  const auto steps = run_filter_bank(fit.bank, sc.observations);
  const auto wins = std::count_if(steps.begin(), steps.end(),
                                  [](const FilterBankStep& s) { return s.best_model == 1; });
  EXPECT_GE(static_cast<double>(wins) / static_cast<double>(steps.size()), 0.95);
}

TEST(FitNormality, IdempotentAtConvergence) {
  const FitResult& fit = perimeter_fit(1);
  const Scenario sc = scenario(ScenarioKind::Perimeter, 1);
  const FitResult again = fit_normality(sc.observations, FitConfig{}, fit.bank);
  EXPECT_TRUE(again.converged);
  EXPECT_EQ(again.learning_iterations, 0);
  EXPECT_EQ(again.bank.models.size(), fit.bank.models.size());
}

TEST(FitNormality, AbnormalFractionIsNonIncreasing) {
  for (std::uint64_t seed : {1u, 2u}) {
    const FitResult& fit = perimeter_fit(seed);
    for (std::size_t i = 1; i < fit.abnormal_fraction.size(); ++i) {
      EXPECT_LE(fit.abnormal_fraction[i], fit.abnormal_fraction[i - 1]);
    }
  }
}

TEST(FitNormality, StillModelIsNeverModified) {
  const FitResult& fit = perimeter_fit(1);
  const double psi0 = calibrate_bootstrap_psi(NoiseParams::defaults(), 50, 7);
  const ModelBank fresh = make_initial_bank(NoiseParams::defaults(), psi0);
  const SlModel& m0 = fit.bank.models[0];
  EXPECT_EQ(m0.psi, fresh.models[0].psi);
  ASSERT_EQ(m0.super_states.size(), 1u);
  EXPECT_EQ(m0.super_states[0].centroid, fresh.models[0].super_states[0].centroid);
  EXPECT_TRUE(m0.super_states[0].control_u.isZero());
}

TEST(FitNormality, NoiselessThenNoisyPerimeterConverges) {
  std::vector<Observation> series = scenario(ScenarioKind::Perimeter, 1, 0.0).observations;
  const auto noisy = scenario(ScenarioKind::Perimeter, 1, 0.05).observations;
  const double shift = series.back().t + 0.11;
  for (auto o : noisy) {
    o.t += shift;
    series.push_back(o);
  }
  const FitResult fit = fit_normality(series, FitConfig{});
  EXPECT_TRUE(fit.converged);
  EXPECT_LE(fit.learning_iterations, 3);
  EXPECT_LE(fit.unexplained_fraction, 0.01);
}

TEST(FitNormality, UTurnAfterPerimeterGetsItsOwnModel) {
  const FitResult& base = perimeter_fit(1);
  const Scenario uturn = scenario(ScenarioKind::UTurn, 1);
  const FitResult fit = fit_normality(uturn.observations, FitConfig{}, base.bank);
  EXPECT_GE(fit.bank.models.size(), 3u);  // still model + perimeter + U-turn
  EXPECT_LE(fit.unexplained_fraction, 0.01);
  for (std::size_t m = 0; m < base.bank.models.size(); ++m) {
    EXPECT_EQ(fit.bank.models[m].psi, base.bank.models[m].psi);
    EXPECT_EQ(fit.bank.models[m].super_states.size(), base.bank.models[m].super_states.size());
  }
}

TEST(LearnModel, PerimeterEdgesCarryTheirVelocity) {
  const FitResult fit = fit_normality(scenario(ScenarioKind::Perimeter, 1, 0.0).observations, FitConfig{});
  ASSERT_GE(fit.bank.models.size(), 2u);
  const ScenarioSpec spec;
  const double r = spec.corner_radius, w = spec.rect_w, h = spec.rect_h, v = spec.speed;
  struct Edge {
    bool (*on)(const Vec2&, double, double, double);
    Vec2 velocity;
  };
  // Interior of each straight edge, a metre away from the corner arcs.
  const Edge edges[] = {
      {[](const Vec2& p, double r, double w, double) { return p.y() < 0.5 && p.x() > r + 1 && p.x() < w - r - 1; }, {v, 0}},
      {[](const Vec2& p, double r, double w, double h) { return p.x() > w - 0.5 && p.y() > r + 1 && p.y() < h - r - 1; }, {0, v}},
      {[](const Vec2& p, double r, double w, double h) { return p.y() > h - 0.5 && p.x() > r + 1 && p.x() < w - r - 1; }, {-v, 0}},
      {[](const Vec2& p, double r, double, double h) { return p.x() < 0.5 && p.y() > r + 1 && p.y() < h - r - 1; }, {0, -v}},
  };
  for (const auto& e : edges) {
    std::size_t members = 0;
    for (const auto& s : fit.bank.models[1].super_states) {
      if (!e.on(position(s.centroid), r, w, h)) continue;
      members += s.member_count;
      EXPECT_LT((s.control_u - e.velocity).norm(), 0.1) << "centroid " << s.centroid.transpose();
    }
    EXPECT_GT(members, 100u);
  }
}

}  // namespace
}  // namespace trajsa
