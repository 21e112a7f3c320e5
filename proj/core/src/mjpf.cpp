#include "trajsa/mjpf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

namespace trajsa {

void MjpfConfig::validate() const {
  if (n_particles < 1) throw InvalidArgument("MJPF needs at least one particle");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) {
    throw InvalidArgument("resample_threshold must lie in (0, 1]");
  }
  if (!(dummy_enter_factor > 0.0) || !(dummy_exit_factor > 0.0)) {
    throw InvalidArgument("dummy factors must be positive");
  }
  if (!(dummy_membership_sigma >= 0.0)) throw InvalidArgument("dummy membership must be >= 0");
}

double ParticleSet::effective_sample_size() const {
  double sq = 0.0;
  for (const auto& p : particles) sq += p.weight * p.weight;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u0) {
  const std::size_t n = weights.size();
  if (n == 0) throw InvalidArgument("resampling needs weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("weights sum to zero");
  const double step = 1.0 / static_cast<double>(n);
  if (!(u0 >= 0.0 && u0 < step)) throw InvalidArgument("offset must lie in [0, 1/N)");

  std::vector<std::size_t> parents(n);
  std::size_t j = 0;
  double cumulative = weights[0] / total;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = u0 + static_cast<double>(i) * step;
    while (u >= cumulative && j + 1 < n) {
      ++j;
      cumulative += weights[j] / total;
    }
    parents[i] = j;
  }
  return parents;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

bool has_region(const Particle& p) { return p.model_id > 0; }

const SuperState& state_of(const ModelBank& bank, const Particle& p) {
  return bank.models[static_cast<std::size_t>(p.model_id)]
      .super_states[static_cast<std::size_t>(p.super_state_id)];
}

/// Transition row for (bin, from); bins without observations for this row
/// borrow from the nearest bin that has them, lower bins first.
Eigen::RowVectorXd transition_row(const TransitionTensor& t, std::size_t bin, int from) {
  const auto r = static_cast<Eigen::Index>(from);
  const auto bins = static_cast<long>(t.num_bins());
  for (long off = 0; off < bins; ++off) {
    for (long cand : {static_cast<long>(bin) - off, static_cast<long>(bin) + off}) {
      if (cand < 0 || cand >= bins) continue;
      if (t.observed[static_cast<std::size_t>(cand)](r) > 0.0) {
        return t.matrices[static_cast<std::size_t>(cand)].row(r);
      }
    }
  }
  return t.matrices[bin].row(r);
}

int sample_row(const Eigen::RowVectorXd& row, double u) {
  double c = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    c += row(j);
    if (u < c) return static_cast<int>(j);
  }
  // Round-off: land on the last state with positive mass.
  for (Eigen::Index j = row.size() - 1; j >= 0; --j) {
    if (row(j) > 0.0) return static_cast<int>(j);
  }
  return 0;
}

std::pair<int, double> nearest_centroid(const SlModel& model, const AgentState& x) {
  int best = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  for (const auto& s : model.super_states) {
    const double d = weighted_distance_sq(x, s.centroid, model.weights);
    if (d < best_sq) {
      best_sq = d;
      best = s.id;
    }
  }
  return {best, std::sqrt(best_sq)};
}

double membership_log(const ModelBank& bank, const Particle& p, const MjpfConfig& cfg) {
  if (!cfg.membership_likelihood || !has_region(p)) return 0.0;
  if (p.is_dummy()) return -0.5 * cfg.dummy_membership_sigma * cfg.dummy_membership_sigma;
  const SuperState& s = state_of(bank, p);
  const Mat2 cov = s.spread.topLeftCorner<2, 2>() + bank.noise.r;
  const Vec2 d = p.belief.mean.head<2>() - position(s.centroid);
  Eigen::LDLT<Mat2> ldlt(cov);
  return -0.5 * d.dot(ldlt.solve(d));
}

}  // namespace

ParticleSet mjpf_init(const ModelBank& bank, const Observation& z0, const MjpfConfig& config) {
  config.validate();
  bank.validate();

  struct Candidate {
    int model;
    int state;
    double mass;
  };
  std::vector<Candidate> candidates;
  const std::size_t first_model = bank.models.size() > 1 ? 1 : 0;
  for (std::size_t m = first_model; m < bank.models.size(); ++m) {
    for (const auto& s : bank.models[m].super_states) {
      candidates.push_back({static_cast<int>(m), s.id, static_cast<double>(std::max<std::size_t>(s.member_count, 1))});
    }
  }
  std::vector<double> masses;
  for (const auto& c : candidates) masses.push_back(c.mass);

  ParticleSet ps;
  ps.rng.seed(config.seed);
  const double step = 1.0 / static_cast<double>(config.n_particles);
  std::uniform_real_distribution<double> offset(0.0, step);
  // Allocate N particles over the candidates by systematic sampling on the masses.
  std::vector<double> cumulative(masses.size());
  double total = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) cumulative[i] = (total += masses[i]);
  const double u0 = offset(ps.rng);
  std::size_t j = 0;
  Mat4 base = Mat4::Zero();
  base.topLeftCorner<2, 2>() = bank.noise.r;
  base.bottomRightCorner<2, 2>() = bank.noise.q.bottomRightCorner<2, 2>();
  for (std::size_t i = 0; i < config.n_particles; ++i) {
    const double u = (u0 + static_cast<double>(i) * step) * total;
    while (u >= cumulative[j] && j + 1 < cumulative.size()) ++j;
    const Candidate& c = candidates[j];
    const SuperState& s = bank.models[static_cast<std::size_t>(c.model)]
                              .super_states[static_cast<std::size_t>(c.state)];
    Particle p;
    p.model_id = c.model;
    p.super_state_id = c.state;
    p.dwell = 1;
    p.belief.mean << z0.z, s.control_u;
    p.belief.cov = s.spread + base;
    p.belief.cov = 0.5 * (p.belief.cov + p.belief.cov.transpose()).eval();
    p.weight = step;
    p.previous_position = z0.z;
    p.last_dt = bank.noise.dt_default;
    ps.particles.push_back(std::move(p));
  }
  return ps;
}

void predict_step(ParticleSet& ps, const ModelBank& bank, double dt) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : ps.particles) {
    p.previous_position = p.belief.mean.head<2>();
    p.last_dt = dt;
    MotionModel motion = MotionModel::random_filter(dt);
    if (!p.is_dummy()) {
      const SlModel& model = bank.models[static_cast<std::size_t>(p.model_id)];
      const auto row = transition_row(model.trans, model.trans.bin_for(p.dwell), p.super_state_id);
      const int next = sample_row(row, unit(ps.rng));
      p.dwell = next == p.super_state_id ? p.dwell + 1 : 1;
      p.super_state_id = next;
      motion = has_region(p) ? MotionModel::motivated(state_of(bank, p).control_u, dt)
                             : MotionModel::unmotivated(dt);
    } else {
      ++p.dwell;
    }
    p.belief = predict(p.belief, motion, bank.noise);
  }
}

AbnormalitySample update_step(ParticleSet& ps, const Observation& z, const ModelBank& bank,
                              const MjpfConfig& config) {
  const std::size_t n = ps.particles.size();
  if (n == 0) throw InvalidArgument("particle set is empty");

  std::vector<double> norms(n);
  std::vector<double> logw(n);
  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = ps.particles[i];
    const KalmanUpdate upd = update(p.belief, z.z, bank.noise);
    norms[i] = innovation_norm(upd.innovation, upd.innovation_cov, config.norm);
    const Eigen::LLT<Mat2> llt(upd.innovation_cov);
    const Vec2 w = llt.matrixL().solve(upd.innovation);
    const double log_det = 2.0 * std::log(llt.matrixL()(0, 0) * llt.matrixL()(1, 1));
    const double loglik = -0.5 * (w.squaredNorm() + log_det + 2.0 * kLog2Pi);
    p.belief = upd.posterior;

    if (has_region(p)) {
      const SlModel& model = bank.models[static_cast<std::size_t>(p.model_id)];
      if (!p.is_dummy()) {
        const auto [nearest, d] = nearest_centroid(model, p.belief.mean);
        (void)nearest;
        if (d > config.dummy_enter_factor * model.psi) {
          p.super_state_id = kDummySuperState;
          p.dwell = 1;
        }
      } else {
        AgentState x;
        x << p.belief.mean.head<2>(), (p.belief.mean.head<2>() - p.previous_position) / p.last_dt;
        const auto [nearest, d] = nearest_centroid(model, x);
        if (d <= config.dummy_exit_factor * model.psi) {
          p.super_state_id = nearest;
          p.dwell = 1;
          p.belief.mean.tail<2>() = model.super_states[static_cast<std::size_t>(nearest)].control_u;
        }
      }
    }
    logw[i] = std::log(p.weight) + loglik + membership_log(bank, p, config);
  }

  AbnormalitySample sample;
  sample.t = z.t;
  sample.signal = median(norms);

  const double max_log = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(max_log)) {
    for (auto& p : ps.particles) p.weight = 1.0 / static_cast<double>(n);
    sample.weights_reset = true;
  } else {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += (logw[i] = std::exp(logw[i] - max_log));
    for (std::size_t i = 0; i < n; ++i) ps.particles[i].weight = logw[i] / total;
  }

  std::map<std::pair<int, int>, double> mass;
  for (const auto& p : ps.particles) mass[{p.model_id, p.super_state_id}] += p.weight;
  auto best = mass.begin();
  for (auto it = mass.begin(); it != mass.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  sample.model_id = best->first.first;
  sample.super_state_id = best->first.second;
  sample.is_dummy = sample.super_state_id == kDummySuperState;

  if (ps.effective_sample_size() < config.resample_threshold * static_cast<double>(n)) {
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = ps.particles[i].weight;
    std::uniform_real_distribution<double> offset(0.0, 1.0 / static_cast<double>(n));
    const auto parents = systematic_resample(weights, offset(ps.rng));
    std::vector<Particle> next;
    next.reserve(n);
    for (std::size_t parent : parents) {
      next.push_back(ps.particles[parent]);
      next.back().weight = 1.0 / static_cast<double>(n);
    }
    ps.particles = std::move(next);
  }
  return sample;
}

std::vector<AbnormalitySample> run_mjpf(const ModelBank& bank, std::span<const Observation> series,
                                        const MjpfConfig& config) {
  if (series.empty()) throw InvalidArgument("MJPF needs a non-empty series");
  validate_series(series);
  ParticleSet ps = mjpf_init(bank, series.front(), config);
  std::vector<AbnormalitySample> out;
  out.reserve(series.size() - 1);
  for (std::size_t k = 1; k < series.size(); ++k) {
    const double dt = step_dt(series[k - 1].t, series[k].t, bank.noise.dt_default);
    predict_step(ps, bank, dt);
    out.push_back(update_step(ps, series[k], bank, config));
  }
  return out;
}

double calibrate_signal_threshold(const ModelBank& bank, std::span<const Observation> series,
                                  const MjpfConfig& config) {
  const auto samples = run_mjpf(bank, series, config);
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) values.push_back(s.signal);
  return certainty_threshold(values);
}

}  // namespace trajsa
