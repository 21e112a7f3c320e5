#include "trajsa/kalman.hpp"

#include <cmath>

namespace trajsa {

Mat4 transition_matrix() {
  Mat4 a = Mat4::Zero();
  a.topLeftCorner<2, 2>().setIdentity();
  return a;
}

Eigen::Matrix<double, 4, 2> control_matrix(double dt) {
  Eigen::Matrix<double, 4, 2> b;
  b.topRows<2>() = Mat2::Identity() * dt;
  b.bottomRows<2>().setIdentity();
  return b;
}

Eigen::Matrix<double, 2, 4> observation_matrix() {
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h.leftCols<2>().setIdentity();
  return h;
}

GaussianBelief predict(const GaussianBelief& belief, const MotionModel& model,
                       const NoiseParams& noise) {
  if (!(model.dt > 0.0)) throw InvalidArgument("prediction step needs dt > 0");
  if (!belief.is_valid()) throw InvalidArgument("prediction input covariance is not PSD");

  // A zeroes the velocity block, so A x + B u reduces to a shift of the position.
  const Vec2 u = model.control();
  GaussianBelief out;
  out.mean.head<2>() = belief.mean.head<2>() + u * model.dt;
  out.mean.tail<2>() = u;
  out.cov = noise.q;
  out.cov.topLeftCorner<2, 2>() += belief.cov.topLeftCorner<2, 2>();
  return out;
}

KalmanUpdate update(const GaussianBelief& prior, const Vec2& z, const NoiseParams& noise) {
  const auto h = observation_matrix();
  const Mat4& p = prior.cov;

  KalmanUpdate out;
  out.innovation = z - prior.mean.head<2>();
  out.innovation_cov = p.topLeftCorner<2, 2>() + noise.r;
  out.innovation_cov = 0.5 * (out.innovation_cov + out.innovation_cov.transpose()).eval();

  Eigen::LLT<Mat2> llt(out.innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw SingularInnovation("innovation covariance is not positive definite");
  }
  const Eigen::Matrix<double, 4, 2> pht = p * h.transpose();
  out.gain = llt.solve(pht.transpose()).transpose();

  out.posterior.mean = prior.mean + out.gain * out.innovation;
  const Mat4 ikh = Mat4::Identity() - out.gain * h;
  Mat4 cov = ikh * p * ikh.transpose() + out.gain * noise.r * out.gain.transpose();
  out.posterior.cov = 0.5 * (cov + cov.transpose());
  return out;
}

Vec2 innovation_velocity(const Vec2& z, const GaussianBelief& predicted, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("innovation velocity needs dt > 0");
  return (z - predicted.mean.head<2>()) / dt;
}

double mahalanobis_norm(const Vec2& innovation, const Mat2& innovation_cov) {
  Eigen::LLT<Mat2> llt(innovation_cov);
  if (llt.info() != Eigen::Success) {
    throw SingularInnovation("innovation covariance is not positive definite");
  }
  const Vec2 w = llt.matrixL().solve(innovation);
  return w.norm();
}

double innovation_norm(const Vec2& innovation, const Mat2& innovation_cov, InnovationNorm kind) {
  if (kind == InnovationNorm::Euclidean) return innovation.norm();
  return mahalanobis_norm(innovation, innovation_cov);
}

double step_dt(double t_prev, double t_cur, double dt_default) {
  const double d = t_cur - t_prev;
  if (!(d > 0.0) || std::abs(d - dt_default) > 0.2 * dt_default) return dt_default;
  return d;
}

}  // namespace trajsa
