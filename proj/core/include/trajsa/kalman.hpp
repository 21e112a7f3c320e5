#pragma once

#include "trajsa/model.hpp"

namespace trajsa {

enum class MotionKind { Unmotivated, Motivated, RandomFilter };

/// Per-step dynamics: position' = position + U*dt, velocity' = U.
/// Unmotivated and RandomFilter both use U = 0.
struct MotionModel {
  MotionKind kind = MotionKind::Unmotivated;
  Vec2 control_u = Vec2::Zero();
  double dt = 0.11;

  static MotionModel unmotivated(double dt) { return {MotionKind::Unmotivated, Vec2::Zero(), dt}; }
  static MotionModel random_filter(double dt) {
    return {MotionKind::RandomFilter, Vec2::Zero(), dt};
  }
  static MotionModel motivated(const Vec2& u, double dt) { return {MotionKind::Motivated, u, dt}; }

  Vec2 control() const { return kind == MotionKind::Motivated ? control_u : Vec2::Zero(); }
};

class SingularInnovation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Gain = Eigen::Matrix<double, 4, 2>;

struct KalmanUpdate {
  GaussianBelief posterior;
  Vec2 innovation = Vec2::Zero();
  Mat2 innovation_cov = Mat2::Identity();
  Gain gain = Gain::Zero();
};

/// Transition matrix A = [I 0; 0 0]: keeps position, drops velocity.
Mat4 transition_matrix();
/// Control matrix B = [I*dt; I].
Eigen::Matrix<double, 4, 2> control_matrix(double dt);
/// Observation matrix H = [I 0].
Eigen::Matrix<double, 2, 4> observation_matrix();

GaussianBelief predict(const GaussianBelief& belief, const MotionModel& model,
                       const NoiseParams& noise);

/// Kalman correction with z = H x + v. Posterior covariance uses the Joseph
/// form and is symmetrized. Throws SingularInnovation if H P H^T + R is not
/// positive definite.
KalmanUpdate update(const GaussianBelief& prior, const Vec2& z, const NoiseParams& noise);

/// (z - H * predicted.mean) / dt.
Vec2 innovation_velocity(const Vec2& z, const GaussianBelief& predicted, double dt);

/// sqrt(eps^T S^-1 eps); throws SingularInnovation when S is not positive definite.
double mahalanobis_norm(const Vec2& innovation, const Mat2& innovation_cov);

enum class InnovationNorm { Mahalanobis, Euclidean };

double innovation_norm(const Vec2& innovation, const Mat2& innovation_cov, InnovationNorm kind);

/// Step length between two timestamps, falling back to `dt_default` when the
/// spacing deviates from it by more than 20%.
double step_dt(double t_prev, double t_cur, double dt_default);

}  // namespace trajsa
