#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace trajsa {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;

/// Agent kinematic state, ordered [x, y, vx, vy] in meters and meters/second.
using AgentState = Vec4;

inline Vec2 position(const AgentState& s) { return s.head<2>(); }
inline Vec2 velocity(const AgentState& s) { return s.tail<2>(); }
inline AgentState make_state(double x, double y, double vx, double vy) {
  return AgentState(x, y, vx, vy);
}

/// Raised when an input violates a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed or inconsistent input data (files, series, schemas).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reserved super-state id for observations outside every learned region.
inline constexpr int kDummySuperState = -1;

struct Observation {
  double t = 0.0;  // seconds from series start
  Vec2 z = Vec2::Zero();
};

/// Throws DataError unless timestamps strictly increase and positions are finite.
void validate_series(std::span<const Observation> series);

struct GaussianBelief {
  AgentState mean = AgentState::Zero();
  Mat4 cov = Mat4::Identity();

  /// Symmetric to 1e-9 and all eigenvalues >= -1e-9.
  bool is_valid() const;
};

struct NoiseParams {
  Mat4 q = Mat4::Zero();
  Mat2 r = Mat2::Zero();
  double dt_default = 0.11;

  /// Q = diag(1e-4, 1e-4, 1e-2, 1e-2), R = (0.05 m)^2 I.
  static NoiseParams defaults();
  void validate() const;
};

/// Weights of the state-space distance; beta scales position, alpha velocity.
struct DistanceWeights {
  double alpha = 0.75;
  double beta = 0.25;

  void validate() const;
};

struct SuperState {
  int id = 0;
  AgentState centroid = AgentState::Zero();
  Vec2 control_u = Vec2::Zero();
  std::size_t member_count = 0;
  Mat4 spread = Mat4::Zero();
};

/// Dwell-time indexed transition matrices between the super-states of one model.
///
/// Dwell edges {e0 < e1 < ...} split dwell counts into edges.size() + 1 bins:
/// [1, e0), [e0, e1), ..., [e_last, inf). `observed(b, i)` records how many
/// transitions out of state i were seen in bin b during estimation.
struct TransitionTensor {
  std::vector<int> dwell_edges;
  std::vector<Eigen::MatrixXd> matrices;
  std::vector<Eigen::VectorXd> observed;

  std::size_t num_bins() const { return matrices.size(); }
  std::size_t num_states() const {
    return matrices.empty() ? 0 : static_cast<std::size_t>(matrices.front().rows());
  }
  std::size_t bin_for(int dwell) const;

  /// Checks shapes, nonnegativity and row sums (1 +/- 1e-9); throws InvalidArgument.
  void validate() const;

  /// Single-bin identity tensor of size n.
  static TransitionTensor identity(std::size_t n);
};

struct SlModel {
  int id = 0;
  std::vector<SuperState> super_states;
  double psi = 0.0;
  TransitionTensor trans;
  DistanceWeights weights;

  void validate() const;
};

enum class WindowLabel { Linear, Curve, Abnormal };

std::string to_string(WindowLabel label);
WindowLabel parse_window_label(const std::string& text);

/// Closed-open interval [start, end) of the timeline carrying a ground-truth label.
struct LabeledWindow {
  double start = 0.0;
  double end = 0.0;
  WindowLabel label = WindowLabel::Linear;

  bool contains(double t) const { return t >= start && t < end; }
};

struct AbnormalitySample {
  double t = 0.0;
  double signal = 0.0;
  int model_id = 0;
  int super_state_id = 0;
  bool is_dummy = false;
  bool weights_reset = false;
};

/// sqrt(beta*dx^2 + beta*dy^2 + alpha*dvx^2 + alpha*dvy^2).
double weighted_distance(const AgentState& a, const AgentState& b, const DistanceWeights& w);

/// Squared form of weighted_distance without argument validation, for inner loops.
inline double weighted_distance_sq(const AgentState& a, const AgentState& b,
                                   const DistanceWeights& w) {
  const Vec4 d = a - b;
  return w.beta * d.head<2>().squaredNorm() + w.alpha * d.tail<2>().squaredNorm();
}

/// mean(d) + 3 * sqrt(population variance(d)).
double certainty_threshold(std::span<const double> distances);

}  // namespace trajsa
