#include "trajsa/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trajsa {

namespace {

constexpr double kSymTol = 1e-9;
constexpr double kRowTol = 1e-9;

template <typename Derived>
bool symmetric_psd(const Eigen::MatrixBase<Derived>& m) {
  if (!m.allFinite()) return false;
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymTol) return false;
  using Plain = typename Derived::PlainObject;
  Eigen::SelfAdjointEigenSolver<Plain> eig(m.derived(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -kSymTol;
}

}  // namespace

void validate_series(std::span<const Observation> series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& o = series[i];
    if (!std::isfinite(o.t) || !o.z.allFinite()) {
      throw DataError("observation " + std::to_string(i) + " is not finite");
    }
    if (i > 0 && !(o.t > series[i - 1].t)) {
      throw DataError("timestamps must strictly increase (observation " + std::to_string(i) +
                      ")");
    }
  }
}

bool GaussianBelief::is_valid() const { return mean.allFinite() && symmetric_psd(cov); }

NoiseParams NoiseParams::defaults() {
  NoiseParams n;
  n.q = Vec4(1e-4, 1e-4, 1e-2, 1e-2).asDiagonal();
  n.r = Mat2::Identity() * (0.05 * 0.05);
  n.dt_default = 0.11;
  return n;
}

void NoiseParams::validate() const {
  if (!symmetric_psd(q)) throw InvalidArgument("process noise Q must be symmetric PSD");
  if (!symmetric_psd(r)) throw InvalidArgument("measurement noise R must be symmetric PSD");
  if (!(dt_default > 0.0) || !std::isfinite(dt_default)) {
    throw InvalidArgument("dt_default must be positive");
  }
}

void DistanceWeights::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || beta < 0.0 || !(alpha > beta) ||
      std::abs(alpha + beta - 1.0) > 1e-12) {
    throw InvalidArgument("distance weights require alpha + beta = 1 and alpha > beta >= 0");
  }
}

std::size_t TransitionTensor::bin_for(int dwell) const {
  const auto it = std::upper_bound(dwell_edges.begin(), dwell_edges.end(), dwell);
  return static_cast<std::size_t>(it - dwell_edges.begin());
}

void TransitionTensor::validate() const {
  if (matrices.size() != dwell_edges.size() + 1) {
    throw InvalidArgument("transition tensor needs dwell_edges.size() + 1 matrices");
  }
  if (observed.size() != matrices.size()) {
    throw InvalidArgument("transition tensor observation counts do not match bins");
  }
  for (std::size_t i = 0; i < dwell_edges.size(); ++i) {
    if (dwell_edges[i] < 1 || (i > 0 && dwell_edges[i] <= dwell_edges[i - 1])) {
      throw InvalidArgument("dwell bin edges must be positive and strictly increasing");
    }
  }
  const auto n = matrices.front().rows();
  for (std::size_t b = 0; b < matrices.size(); ++b) {
    const auto& m = matrices[b];
    if (m.rows() != n || m.cols() != n || observed[b].size() != n) {
      throw InvalidArgument("transition matrices must be square and share one size");
    }
    if (!m.allFinite() || (m.array() < 0.0).any()) {
      throw InvalidArgument("transition probabilities must be finite and nonnegative");
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      if (std::abs(m.row(r).sum() - 1.0) > kRowTol) {
        throw InvalidArgument("transition row " + std::to_string(r) + " in bin " +
                              std::to_string(b) + " does not sum to 1");
      }
    }
  }
}

TransitionTensor TransitionTensor::identity(std::size_t n) {
  TransitionTensor t;
  const auto size = static_cast<Eigen::Index>(n);
  t.matrices.push_back(Eigen::MatrixXd::Identity(size, size));
  t.observed.push_back(Eigen::VectorXd::Zero(size));
  return t;
}

void SlModel::validate() const {
  if (super_states.empty()) throw InvalidArgument("model needs at least one super-state");
  if (!(psi > 0.0) || !std::isfinite(psi)) throw InvalidArgument("model psi must be positive");
  weights.validate();
  for (std::size_t i = 0; i < super_states.size(); ++i) {
    if (super_states[i].id != static_cast<int>(i)) {
      throw InvalidArgument("super-state ids must be dense 0..L-1");
    }
  }
  trans.validate();
  if (trans.num_states() != super_states.size()) {
    throw InvalidArgument("transition tensor size does not match vocabulary");
  }
}

std::string to_string(WindowLabel label) {
  switch (label) {
    case WindowLabel::Linear:
      return "linear";
    case WindowLabel::Curve:
      return "curve";
    case WindowLabel::Abnormal:
      return "abnormal";
  }
  return "linear";
}

WindowLabel parse_window_label(const std::string& text) {
  if (text == "linear") return WindowLabel::Linear;
  if (text == "curve") return WindowLabel::Curve;
  if (text == "abnormal") return WindowLabel::Abnormal;
  throw DataError("unknown window label '" + text + "'");
}

double weighted_distance(const AgentState& a, const AgentState& b, const DistanceWeights& w) {
  w.validate();
  return std::sqrt(weighted_distance_sq(a, b, w));
}

double certainty_threshold(std::span<const double> distances) {
  if (distances.empty()) {
    throw InvalidArgument("certainty threshold needs at least one distance");
  }
  for (double d : distances) {
    if (!std::isfinite(d) || d < 0.0) {
      throw InvalidArgument("distances must be finite and nonnegative");
    }
  }
  const double n = static_cast<double>(distances.size());
  const double mean = std::accumulate(distances.begin(), distances.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : distances) ss += (d - mean) * (d - mean);
  return mean + 3.0 * std::sqrt(ss / n);
}

}  // namespace trajsa
