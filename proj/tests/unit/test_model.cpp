#include "oracles.hpp"
#include "trajsa/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

namespace trajsa {
namespace {

const DistanceWeights kW{0.75, 0.25};

TEST(WeightedDistance, IdenticalStatesAreZero) {
  const AgentState a = make_state(3.0, -1.0, 0.5, 2.0);
  EXPECT_EQ(weighted_distance(a, a, kW), 0.0);
}

TEST(WeightedDistance, HandValues) {
  const AgentState z = AgentState::Zero();
  EXPECT_NEAR(weighted_distance(make_state(2, 0, 2, 0), z, kW), 2.0, 1e-9);
  EXPECT_NEAR(weighted_distance(make_state(0, 0, 1, 0), z, kW), 0.8660254037844386, 1e-9);
}

TEST(WeightedDistance, RejectsInvalidWeights) {
  const AgentState z = AgentState::Zero();
  EXPECT_THROW(weighted_distance(z, z, {0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(weighted_distance(z, z, {0.25, 0.75}), InvalidArgument);
  EXPECT_THROW(weighted_distance(z, z, {0.8, 0.3}), InvalidArgument);
  EXPECT_THROW(weighted_distance(z, z, {1.1, -0.1}), InvalidArgument);
  EXPECT_NO_THROW(weighted_distance(z, z, {1.0, 0.0}));
}

TEST(WeightedDistance, IsAMetricOnRandomTriples) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 3.0);
  auto draw = [&] { return make_state(g(rng), g(rng), g(rng), g(rng)); };
  for (int i = 0; i < 500; ++i) {
    const AgentState a = draw(), b = draw(), c = draw();
    const double ab = weighted_distance(a, b, kW);
    EXPECT_GE(ab, 0.0);
    EXPECT_DOUBLE_EQ(ab, weighted_distance(b, a, kW));
    EXPECT_LE(weighted_distance(a, c, kW), ab + weighted_distance(b, c, kW) + 1e-12);
    EXPECT_GT(ab, 0.0);
  }
}

TEST(CertaintyThreshold, HandValues) {
  EXPECT_NEAR(certainty_threshold(std::vector<double>{2, 2, 2}), 2.0, 1e-9);
  EXPECT_NEAR(certainty_threshold(std::vector<double>{5}), 5.0, 1e-9);
  EXPECT_NEAR(certainty_threshold(std::vector<double>{1, 2, 3}), 2.0 + 3.0 * std::sqrt(2.0 / 3.0), 1e-9);
  EXPECT_NEAR(certainty_threshold(std::vector<double>{1, 2, 3}), 4.449490, 1e-6);
}

TEST(CertaintyThreshold, RejectsBadInput) {
  EXPECT_THROW(certainty_threshold(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(certainty_threshold(std::vector<double>{1.0, -0.5}), InvalidArgument);
  EXPECT_THROW(certainty_threshold(std::vector<double>{std::nan("")}), InvalidArgument);
}

TEST(CertaintyThreshold, MatchesOracleAndIsHomogeneous) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d(1 + trial);
    for (double& x : d) x = e(rng);
    const double psi = certainty_threshold(d);
    EXPECT_NEAR(psi, oracle::mean_plus_three_sigma(d), 1e-12);
    const double c = 0.1 + trial;
    std::vector<double> scaled = d;
    for (double& x : scaled) x *= c;
    EXPECT_NEAR(certainty_threshold(scaled), c * psi, 1e-12 * c * psi + 1e-15);
  }
}

TEST(Series, ValidationCatchesOrderAndNonFinite) {
  std::vector<Observation> ok{{0.0, Vec2(0, 0)}, {0.1, Vec2(1, 0)}};
  EXPECT_NO_THROW(validate_series(ok));
  std::vector<Observation> same_t{{0.0, Vec2(0, 0)}, {0.0, Vec2(1, 0)}};
  EXPECT_THROW(validate_series(same_t), DataError);
  std::vector<Observation> nan_z{{0.0, Vec2(0, 0)}, {0.1, Vec2(std::nan(""), 0)}};
  EXPECT_THROW(validate_series(nan_z), DataError);
}

TEST(GaussianBelief, ValidityChecksSymmetryAndPsd) {
  GaussianBelief b;
  EXPECT_TRUE(b.is_valid());
  b.cov(0, 1) = 0.5;
  EXPECT_FALSE(b.is_valid());
  b.cov(1, 0) = 0.5;
  EXPECT_TRUE(b.is_valid());
  b.cov = -Mat4::Identity();
  EXPECT_FALSE(b.is_valid());
}

TEST(TransitionTensor, BinsFollowEdges) {
  TransitionTensor t = TransitionTensor::identity(2);
  t.dwell_edges = {10, 20};
  t.matrices.assign(3, Eigen::MatrixXd::Identity(2, 2));
  t.observed.assign(3, Eigen::VectorXd::Zero(2));
  EXPECT_NO_THROW(t.validate());
  EXPECT_EQ(t.bin_for(1), 0u);
  EXPECT_EQ(t.bin_for(9), 0u);
  EXPECT_EQ(t.bin_for(10), 1u);
  EXPECT_EQ(t.bin_for(19), 1u);
  EXPECT_EQ(t.bin_for(20), 2u);
  EXPECT_EQ(t.bin_for(1000), 2u);
}

TEST(TransitionTensor, ValidateRejectsNonStochasticRows) {
  TransitionTensor t = TransitionTensor::identity(2);
  t.matrices[0](0, 0) = 0.9;
  EXPECT_THROW(t.validate(), InvalidArgument);
  t.matrices[0](0, 0) = 1.5;
  t.matrices[0](0, 1) = -0.5;
  EXPECT_THROW(t.validate(), InvalidArgument);
  TransitionTensor u = TransitionTensor::identity(2);
  u.dwell_edges = {5, 5};
  u.matrices.assign(3, Eigen::MatrixXd::Identity(2, 2));
  u.observed.assign(3, Eigen::VectorXd::Zero(2));
  EXPECT_THROW(u.validate(), InvalidArgument);
}

TEST(SlModel, ValidateChecksInvariants) {
  SlModel m;
  m.id = 1;
  SuperState s;
  s.id = 0;
  s.member_count = 3;
  m.super_states = {s};
  m.psi = 0.5;
  m.trans = TransitionTensor::identity(1);
  EXPECT_NO_THROW(m.validate());
  m.psi = 0.0;
  EXPECT_THROW(m.validate(), InvalidArgument);
  m.psi = 0.5;
  m.super_states[0].id = 4;
  EXPECT_THROW(m.validate(), InvalidArgument);
}

TEST(Labels, RoundTripAndWindowsAreClosedOpen) {
  for (auto l : {WindowLabel::Linear, WindowLabel::Curve, WindowLabel::Abnormal}) {
    EXPECT_EQ(parse_window_label(to_string(l)), l);
  }
  EXPECT_THROW(parse_window_label("weird"), DataError);
  const LabeledWindow w{1.0, 2.0, WindowLabel::Abnormal};
  EXPECT_TRUE(w.contains(1.0));
  EXPECT_TRUE(w.contains(1.999));
  EXPECT_FALSE(w.contains(2.0));
}

TEST(NoiseParams, DefaultsMatchDocumentedValues) {
  const NoiseParams n = NoiseParams::defaults();
  EXPECT_EQ(n.q.diagonal(), Vec4(1e-4, 1e-4, 1e-2, 1e-2));
  EXPECT_TRUE(n.q.isDiagonal());
  EXPECT_NEAR(n.r(0, 0), 0.0025, 1e-15);
  EXPECT_NEAR(n.r(1, 1), 0.0025, 1e-15);
  EXPECT_EQ(n.r(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(n.dt_default, 0.11);
  NoiseParams bad = n;
  bad.dt_default = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

}  // namespace
}  // namespace trajsa
