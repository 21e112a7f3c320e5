#include "trajsa/mjpf.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

namespace trajsa {
namespace {

SuperState make_super_state(int id, const AgentState& centroid, std::size_t members) {
  SuperState s;
  s.id = id;
  s.centroid = centroid;
  s.control_u = velocity(centroid);
  s.member_count = members;
  return s;
}

/// Bank of the still model plus one learned model with the given states and a
/// single-bin transition matrix marked as fully observed.
ModelBank bank_with(std::vector<SuperState> states, const Eigen::MatrixXd& trans, double psi) {
  ModelBank bank = make_initial_bank(NoiseParams::defaults(), 0.5);
  SlModel m;
  m.id = 1;
  m.super_states = std::move(states);
  m.psi = psi;
  m.trans.matrices = {trans};
  m.trans.observed = {Eigen::VectorXd::Ones(trans.rows())};
  bank.models.push_back(std::move(m));
  bank.validate();
  return bank;
}

ModelBank two_state_bank(const Eigen::Matrix2d& trans, std::size_t c0 = 1, std::size_t c1 = 1) {
  return bank_with({make_super_state(0, make_state(0, 0, 1, 0), c0),
                    make_super_state(1, make_state(0, 0, 0, 1), c1)},
                   trans, 10.0);
}

TEST(MjpfInit, SingleStateGivesUniformWeights) {
  const ModelBank bank = bank_with({make_super_state(0, make_state(0, 0, 1, 0), 7)},
                                   Eigen::MatrixXd::Identity(1, 1), 1.0);
  MjpfConfig cfg;
  cfg.n_particles = 5;
  const ParticleSet ps = mjpf_init(bank, {0.0, Vec2(3, 4)}, cfg);
  ASSERT_EQ(ps.particles.size(), 5u);
  for (const auto& p : ps.particles) {
    EXPECT_EQ(p.model_id, 1);
    EXPECT_EQ(p.super_state_id, 0);
    EXPECT_EQ(p.dwell, 1);
    EXPECT_DOUBLE_EQ(p.weight, 0.2);
    EXPECT_EQ(position(p.belief.mean), Vec2(3, 4));
    EXPECT_EQ(velocity(p.belief.mean), Vec2(1, 0));
  }
}

TEST(MjpfInit, AllocationFollowsMemberCounts) {
  const ModelBank bank = two_state_bank(Eigen::Matrix2d::Identity(), 90, 10);
  MjpfConfig cfg;
  cfg.n_particles = 50;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    cfg.seed = seed;
    const ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
    int first = 0;
    double total = 0.0;
    for (const auto& p : ps.particles) {
      first += p.super_state_id == 0;
      total += p.weight;
    }
    EXPECT_EQ(first, 45);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(MjpfInit, UsesStillModelOnlyWithoutLearnedModels) {
  const ModelBank bank = make_initial_bank(NoiseParams::defaults(), 0.5);
  MjpfConfig cfg;
  cfg.n_particles = 3;
  const ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
  for (const auto& p : ps.particles) EXPECT_EQ(p.model_id, 0);
  cfg.n_particles = 0;
  EXPECT_THROW(mjpf_init(bank, {0.0, Vec2::Zero()}, cfg), InvalidArgument);
}

TEST(PredictStep, DegenerateRows) {
  Eigen::Matrix2d t;
  t << 1, 0, 1, 0;
  const ModelBank bank = two_state_bank(t);
  MjpfConfig cfg;
  cfg.n_particles = 20;
  ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
  for (int step = 0; step < 3; ++step) predict_step(ps, bank, 0.1);
  for (const auto& p : ps.particles) {
    EXPECT_EQ(p.super_state_id, 0);
    // Particles that started in state 1 jumped on the first step.
    EXPECT_TRUE(p.dwell == 4 || p.dwell == 3);
  }
  t << 0, 1, 0, 1;
  const ModelBank jump = two_state_bank(t);
  ParticleSet js = mjpf_init(jump, {0.0, Vec2::Zero()}, cfg);
  for (auto& p : js.particles) {
    p.super_state_id = 0;
    p.dwell = 5;
  }
  predict_step(js, jump, 0.1);
  for (const auto& p : js.particles) {
    EXPECT_EQ(p.super_state_id, 1);
    EXPECT_EQ(p.dwell, 1);
    EXPECT_LT((position(p.belief.mean) - Vec2(0, 0.1)).norm(), 1e-12);
  }
}

TEST(PredictStep, EmpiricalSplitMatchesRow) {
  Eigen::Matrix2d t;
  t << 0.7, 0.3, 0.0, 1.0;
  const ModelBank bank = two_state_bank(t);
  MjpfConfig cfg;
  cfg.n_particles = 10000;
  ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
  for (auto& p : ps.particles) p.super_state_id = 0;
  predict_step(ps, bank, 0.1);
  double stay = 0.0;
  for (const auto& p : ps.particles) stay += p.super_state_id == 0;
  EXPECT_NEAR(stay / 10000.0, 0.7, 0.02);
}

TEST(PredictStep, UnobservedBinBorrowsNearestObservedRow) {
  ModelBank bank = two_state_bank(Eigen::Matrix2d::Identity());
  auto& trans = bank.models[1].trans;
  trans.dwell_edges = {3};
  Eigen::Matrix2d jump;
  jump << 0, 1, 0, 1;
  Eigen::Matrix2d uniform = Eigen::Matrix2d::Constant(0.5);
  trans.matrices = {jump, uniform};
  trans.observed = {Eigen::Vector2d(4, 4), Eigen::Vector2d(0, 0)};
  bank.validate();
  MjpfConfig cfg;
  cfg.n_particles = 200;
  ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
  for (auto& p : ps.particles) {
    p.super_state_id = 0;
    p.dwell = 10;
  }
  predict_step(ps, bank, 0.1);
  for (const auto& p : ps.particles) EXPECT_EQ(p.super_state_id, 1);
}

TEST(PredictStep, DummyParticlesStayStill) {
  const ModelBank bank = two_state_bank(Eigen::Matrix2d::Identity());
  MjpfConfig cfg;
  cfg.n_particles = 4;
  ParticleSet ps = mjpf_init(bank, {0.0, Vec2(1, 1)}, cfg);
  for (auto& p : ps.particles) p.super_state_id = kDummySuperState;
  predict_step(ps, bank, 0.1);
  for (const auto& p : ps.particles) {
    EXPECT_TRUE(p.is_dummy());
    EXPECT_EQ(position(p.belief.mean), Vec2(1, 1));
    EXPECT_TRUE(velocity(p.belief.mean).isZero());
  }
}

TEST(Median, OddAndEvenCounts) {
  EXPECT_DOUBLE_EQ(median({0.1, 5.0, 0.2}), 0.2);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_DOUBLE_EQ(median({7.0}), 7.0);
  EXPECT_THROW(median({}), InvalidArgument);
}

TEST(SystematicResample, DegenerateWeights) {
  const std::vector<double> w{1.0, 0.0, 0.0};
  for (double u0 : {0.0, 0.1, 0.3}) {
    for (std::size_t parent : systematic_resample(w, u0)) EXPECT_EQ(parent, 0u);
  }
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_THROW(systematic_resample(zero, 0.1), InvalidArgument);
  EXPECT_THROW(systematic_resample(w, 0.5), InvalidArgument);
}

TEST(SystematicResample, IsUnbiased) {
  const std::vector<double> w{0.1, 0.25, 0.05, 0.35, 0.15, 0.1};
  const std::size_t n = w.size();
  constexpr int kTrials = 10000;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> offset(0.0, 1.0 / static_cast<double>(n));
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  for (int t = 0; t < kTrials; ++t) {
    std::vector<double> count(n, 0.0);
    for (std::size_t parent : systematic_resample(w, offset(rng))) count[parent] += 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum[i] += count[i];
      sum_sq[i] += count[i] * count[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = sum[i] / kTrials;
    const double var = std::max(0.0, sum_sq[i] / kTrials - mean * mean);
    const double expected = static_cast<double>(n) * w[i];
    EXPECT_LE(std::abs(mean - expected), 3.0 * std::sqrt(var / kTrials) + 1e-9) << "particle " << i;
  }
}

TEST(UpdateStep, PerfectPredictionHasZeroSignal) {
  const Vec2 u(1.0, 0.5);
  const ModelBank bank = bank_with({make_super_state(0, make_state(0, 0, u.x(), u.y()), 5)},
                                   Eigen::MatrixXd::Identity(1, 1), 1e6);
  MjpfConfig cfg;
  cfg.n_particles = 1;
  ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
  Vec2 z = Vec2::Zero();
  for (int k = 1; k <= 20; ++k) {
    z = z + u * 0.11;
    predict_step(ps, bank, 0.11);
    const auto s = update_step(ps, {0.11 * k, z}, bank, cfg);
    EXPECT_NEAR(s.signal, 0.0, 1e-9);
    EXPECT_FALSE(s.is_dummy);
  }
}

TEST(UpdateStep, AllZeroWeightsReset) {
  const ModelBank bank = two_state_bank(Eigen::Matrix2d::Identity());
  MjpfConfig cfg;
  cfg.n_particles = 4;
  ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
  for (auto& p : ps.particles) p.weight = 0.0;
  predict_step(ps, bank, 0.1);
  const auto s = update_step(ps, {0.1, Vec2(0.1, 0.0)}, bank, cfg);
  EXPECT_TRUE(s.weights_reset);
  for (const auto& p : ps.particles) EXPECT_DOUBLE_EQ(p.weight, 0.25);
}

TEST(UpdateStep, FarObservationSwitchesToDummyAndBack) {
  const ModelBank bank = bank_with({make_super_state(0, make_state(0, 0, 0.1, 0), 5)},
                                   Eigen::MatrixXd::Identity(1, 1), 0.5);
  MjpfConfig cfg;
  cfg.n_particles = 3;
  ParticleSet ps = mjpf_init(bank, {0.0, Vec2::Zero()}, cfg);
  predict_step(ps, bank, 0.1);
  auto s = update_step(ps, {0.1, Vec2(50, 50)}, bank, cfg);
  EXPECT_TRUE(s.is_dummy);
  EXPECT_EQ(s.super_state_id, kDummySuperState);
  for (int k = 0; k < 60; ++k) {
    predict_step(ps, bank, 0.1);
    s = update_step(ps, {0.2 + 0.1 * k, Vec2::Zero()}, bank, cfg);
  }
  EXPECT_FALSE(s.is_dummy);
}

TEST(RunMjpf, SingleParticleIsAPlainKalmanFilter) {
  const Vec2 u(0.8, -0.2);
  ModelBank bank = bank_with({make_super_state(0, make_state(0, 0, u.x(), u.y()), 5)},
                             Eigen::MatrixXd::Identity(1, 1), 1e6);
  bank.models[1].super_states[0].spread = Vec4(0.01, 0.02, 0.03, 0.04).asDiagonal();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.2);
  std::vector<Observation> series;
  for (int k = 0; k < 100; ++k) series.push_back({0.11 * k, Vec2(0.1 * k + g(rng), g(rng))});

  MjpfConfig cfg;
  cfg.n_particles = 1;
  const auto out = run_mjpf(bank, series, cfg);
  ASSERT_EQ(out.size(), series.size() - 1);

  GaussianBelief b;
  b.mean << series[0].z, u;
  b.cov = bank.models[1].super_states[0].spread;
  b.cov.topLeftCorner<2, 2>() += bank.noise.r;
  b.cov.bottomRightCorner<2, 2>() += bank.noise.q.bottomRightCorner<2, 2>();
  for (std::size_t k = 1; k < series.size(); ++k) {
    const auto pred = predict(b, MotionModel::motivated(u, 0.11), bank.noise);
    const auto upd = update(pred, series[k].z, bank.noise);
    EXPECT_NEAR(out[k - 1].signal, mahalanobis_norm(upd.innovation, upd.innovation_cov), 1e-12);
    b = upd.posterior;
  }
}

TEST(RunMjpf, DeterministicNormalizedAndNonnegative) {
  Eigen::Matrix2d t;
  t << 0.9, 0.1, 0.2, 0.8;
  const ModelBank bank = two_state_bank(t, 30, 20);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<Observation> series;
  for (int k = 0; k < 150; ++k) series.push_back({0.11 * k, Vec2(0.05 * k + g(rng), g(rng))});
  MjpfConfig cfg;
  cfg.n_particles = 25;
  cfg.seed = 4;
  const auto a = run_mjpf(bank, series, cfg);
  const auto b = run_mjpf(bank, series, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].signal, b[k].signal);
    EXPECT_EQ(a[k].super_state_id, b[k].super_state_id);
    EXPECT_GE(a[k].signal, 0.0);
  }

  ParticleSet ps = mjpf_init(bank, series[0], cfg);
  for (std::size_t k = 1; k < series.size(); ++k) {
    predict_step(ps, bank, 0.11);
    update_step(ps, series[k], bank, cfg);
    double total = 0.0;
    for (const auto& p : ps.particles) {
      total += p.weight;
      EXPECT_GE(p.dwell, 1);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_GE(ps.effective_sample_size(), 1.0 - 1e-9);
    EXPECT_LE(ps.effective_sample_size(), 25.0 + 1e-9);
  }
  EXPECT_THROW(run_mjpf(bank, {}, cfg), InvalidArgument);
}

TEST(MjpfConfig, Validation) {
  MjpfConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.resample_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = MjpfConfig{};
  cfg.dummy_exit_factor = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

}  // namespace
}  // namespace trajsa
