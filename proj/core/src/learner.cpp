#include "trajsa/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace trajsa {

void ModelBank::validate() const {
  if (models.empty()) throw InvalidArgument("model bank is empty");
  noise.validate();
  const auto& m0 = models.front();
  if (m0.super_states.size() != 1 || !m0.super_states.front().control_u.isZero()) {
    throw InvalidArgument("model 0 must hold exactly one super-state with zero control");
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].id != static_cast<int>(i)) throw InvalidArgument("model ids must be dense");
    models[i].validate();
  }
}

ModelBank make_initial_bank(const NoiseParams& noise, double bootstrap_psi) {
  SlModel m0;
  m0.id = 0;
  SuperState still;
  still.id = 0;
  still.member_count = 1;
  m0.super_states.push_back(still);
  m0.psi = bootstrap_psi;
  m0.trans = TransitionTensor::identity(1);

  ModelBank bank;
  bank.noise = noise;
  bank.models.push_back(std::move(m0));
  bank.validate();
  return bank;
}

namespace {

struct ModelTrack {
  GaussianBelief belief;
  Vec2 velocity = Vec2::Zero();
};

/// Nearest super-state of `model` to `x`, or DUMMY when farther than psi.
int select_super_state(const SlModel& model, const AgentState& x) {
  int best = kDummySuperState;
  double best_sq = std::numeric_limits<double>::infinity();
  for (const auto& s : model.super_states) {
    const double d = weighted_distance_sq(x, s.centroid, model.weights);
    if (d < best_sq) {
      best_sq = d;
      best = s.id;
    }
  }
  return std::sqrt(best_sq) > model.psi ? kDummySuperState : best;
}

GaussianBelief initial_belief(const Vec2& z0, const NoiseParams& noise) {
  GaussianBelief b;
  b.mean << z0, Vec2::Zero();
  b.cov = Mat4::Zero();
  b.cov.topLeftCorner<2, 2>() = noise.r;
  b.cov.bottomRightCorner<2, 2>() = noise.q.bottomRightCorner<2, 2>();
  return b;
}

}  // namespace

std::vector<FilterBankStep> run_filter_bank(const ModelBank& bank,
                                            std::span<const Observation> series) {
  if (series.size() < 2) throw InvalidArgument("filter bank needs at least two observations");
  validate_series(series);
  bank.validate();

  const std::size_t n_models = bank.models.size();
  std::vector<ModelTrack> tracks(n_models);
  for (auto& tr : tracks) tr.belief = initial_belief(series.front().z, bank.noise);

  std::vector<FilterBankStep> steps;
  steps.reserve(series.size() - 1);
  for (std::size_t k = 1; k < series.size(); ++k) {
    const double dt = step_dt(series[k - 1].t, series[k].t, bank.noise.dt_default);
    FilterBankStep step;
    step.t = series[k].t;
    step.per_model_error.resize(n_models);
    step.per_model_super_state.resize(n_models);
    std::vector<GaussianBelief> posteriors(n_models);

    for (std::size_t m = 0; m < n_models; ++m) {
      const SlModel& model = bank.models[m];
      ModelTrack& tr = tracks[m];
      int ss = 0;
      MotionModel motion = MotionModel::unmotivated(dt);
      if (m > 0) {
        AgentState x;
        x << tr.belief.mean.head<2>(), tr.velocity;
        ss = select_super_state(model, x);
        motion = ss == kDummySuperState
                     ? MotionModel::random_filter(dt)
                     : MotionModel::motivated(model.super_states[static_cast<std::size_t>(ss)].control_u, dt);
      }
      const GaussianBelief prior = predict(tr.belief, motion, bank.noise);
      const KalmanUpdate upd = update(prior, series[k].z, bank.noise);
      const Vec2 correction = (upd.gain * upd.innovation).head<2>() / dt;

      tr.belief = upd.posterior;
      tr.velocity = motion.control() + correction;
      posteriors[m] = upd.posterior;
      step.per_model_error[m] = correction.norm();
      step.per_model_super_state[m] = ss;
    }

    const auto best = std::min_element(step.per_model_error.begin(), step.per_model_error.end());
    step.best_model = static_cast<int>(best - step.per_model_error.begin());
    const auto bm = static_cast<std::size_t>(step.best_model);
    step.best_super_state = step.per_model_super_state[bm];
    step.state_estimate.mean << series[k].z, tracks[bm].velocity;
    step.state_estimate.cov = posteriors[bm].cov;
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<bool> abnormal_mask(std::span<const FilterBankStep> steps, const ModelBank& bank) {
  std::vector<bool> mask(steps.size(), false);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto m = static_cast<std::size_t>(steps[k].best_model);
    if (m >= bank.models.size()) throw InvalidArgument("filter bank step names an unknown model");
    mask[k] = steps[k].per_model_error[m] > bank.models[m].psi;
  }
  return mask;
}

std::vector<AbnormalSegment> detect_abnormal_segments(std::span<const FilterBankStep> steps,
                                                      const ModelBank& bank, int gap_min) {
  const auto mask = abnormal_mask(steps, bank);
  std::vector<AbnormalSegment> segments;
  std::size_t k = 0;
  while (k < mask.size()) {
    if (!mask[k]) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end + 1 < mask.size() && mask[end + 1]) ++end;
    if (!segments.empty() &&
        static_cast<long>(k) - static_cast<long>(segments.back().last) - 1 < gap_min) {
      segments.back().last = end;
    } else {
      segments.push_back({k, end, {}});
    }
    k = end + 1;
  }
  for (auto& seg : segments) {
    seg.states.reserve(seg.size());
    for (std::size_t i = seg.first; i <= seg.last; ++i) seg.states.push_back(steps[i].state_estimate.mean);
  }
  return segments;
}

TransitionTensor estimate_transitions(std::span<const std::vector<int>> sequences, std::size_t L,
                                      std::span<const int> dwell_edges, double smoothing) {
  if (L == 0) throw InvalidArgument("transition estimation needs L >= 1");
  if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) {
    throw InvalidArgument("smoothing must be finite and nonnegative");
  }
  bool any = false;
  for (const auto& seq : sequences) any = any || !seq.empty();
  if (!any) throw InvalidArgument("transition estimation needs a non-empty assignment sequence");

  TransitionTensor t;
  t.dwell_edges.assign(dwell_edges.begin(), dwell_edges.end());
  const auto n = static_cast<Eigen::Index>(L);
  const std::size_t bins = t.dwell_edges.size() + 1;
  std::vector<Eigen::MatrixXd> counts(bins, Eigen::MatrixXd::Zero(n, n));

  for (const auto& seq : sequences) {
    for (int s : seq) {
      if (s < 0 || static_cast<std::size_t>(s) >= L) {
        throw InvalidArgument("super-state index " + std::to_string(s) + " out of range");
      }
    }
    int dwell = 1;
    for (std::size_t k = 1; k < seq.size(); ++k) {
      counts[t.bin_for(dwell)](seq[k - 1], seq[k]) += 1.0;
      dwell = seq[k] == seq[k - 1] ? dwell + 1 : 1;
    }
  }

  const double uniform = 1.0 / static_cast<double>(L);
  for (std::size_t b = 0; b < bins; ++b) {
    Eigen::MatrixXd p(n, n);
    Eigen::VectorXd observed(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const double total = counts[b].row(r).sum();
      observed(r) = total;
      if (total == 0.0) {
        p.row(r).setConstant(uniform);
      } else {
        p.row(r) = (counts[b].row(r).array() + smoothing) / (total + smoothing * static_cast<double>(L));
      }
    }
    t.matrices.push_back(std::move(p));
    t.observed.push_back(std::move(observed));
  }
  t.validate();
  return t;
}

TransitionTensor estimate_transitions(std::span<const int> assignments, std::size_t L,
                                      std::span<const int> dwell_edges, double smoothing) {
  const std::vector<int> seq(assignments.begin(), assignments.end());
  return estimate_transitions(std::span<const std::vector<int>>(&seq, 1), L, dwell_edges, smoothing);
}

SomConfig fitted_som_config(const LearnConfig& config, std::size_t n_samples) {
  SomConfig som = config.som;
  if (config.samples_per_neuron <= 0.0) return som;
  const double cap = std::max(2.0, static_cast<double>(n_samples) / config.samples_per_neuron);
  const double grid = static_cast<double>(som.rows) * static_cast<double>(som.cols);
  if (grid <= cap) return som;
  // Shrink both sides by the same factor, keeping at least two neurons.
  const double f = std::sqrt(cap / grid);
  som.rows = std::max(1, static_cast<int>(std::floor(som.rows * f)));
  som.cols = std::max(1, static_cast<int>(std::floor(som.cols * f)));
  if (som.rows * som.cols < 2) som.cols = 2;
  if (config.som.sigma0 > 0.0) som.sigma0 = std::min(config.som.sigma0, std::max(som.rows, som.cols) / 2.0);
  return som;
}

SlModel learn_model(std::span<const std::vector<AgentState>> segments, const LearnConfig& config,
                    int model_id) {
  std::vector<AgentState> pooled;
  for (const auto& seg : segments) pooled.insert(pooled.end(), seg.begin(), seg.end());
  if (pooled.size() < config.min_states) {
    throw InvalidArgument("learning a model needs at least " + std::to_string(config.min_states) +
                          " states, got " + std::to_string(pooled.size()));
  }

  const SomMap map = som_train(pooled, fitted_som_config(config, pooled.size()));
  std::vector<int> labels;
  SlModel model;
  model.id = model_id;
  model.weights = config.som.weights;
  model.super_states = extract_superstates(map, pooled, &labels);
  model.psi = std::max(vocabulary_threshold(model.super_states, model.weights), config.psi_floor);

  std::vector<std::vector<int>> sequences;
  std::size_t offset = 0;
  for (const auto& seg : segments) {
    sequences.emplace_back(labels.begin() + static_cast<long>(offset),
                           labels.begin() + static_cast<long>(offset + seg.size()));
    offset += seg.size();
  }
  model.trans = estimate_transitions(sequences, model.super_states.size(), config.dwell_edges,
                                     config.smoothing);
  model.validate();
  return model;
}

SlModel learn_model(std::span<const AgentState> states, const LearnConfig& config, int model_id) {
  const std::vector<AgentState> seg(states.begin(), states.end());
  return learn_model(std::span<const std::vector<AgentState>>(&seg, 1), config, model_id);
}

double calibrate_bootstrap_psi(const NoiseParams& noise, int window, std::uint64_t seed,
                               std::span<const Observation> still) {
  if (window < 1) throw InvalidArgument("calibration window must be positive");
  noise.validate();
  std::vector<Observation> synthetic;
  if (still.size() < 2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::LLT<Mat2> llt(noise.r);
    const Mat2 l = llt.info() == Eigen::Success ? Mat2(llt.matrixL()) : Mat2::Zero();
    for (int k = 0; k <= window; ++k) {
      const double a = gauss(rng);
      const double b = gauss(rng);
      synthetic.push_back({k * noise.dt_default, l * Vec2(a, b)});
    }
    still = synthetic;
  }

  const ModelBank bank = make_initial_bank(noise, 1.0);
  const auto steps = run_filter_bank(bank, still);
  const std::size_t used = std::min<std::size_t>(steps.size(), static_cast<std::size_t>(window));
  std::vector<double> errors;
  errors.reserve(used);
  for (std::size_t k = 0; k < used; ++k) errors.push_back(steps[k].per_model_error.front());
  return std::max(certainty_threshold(errors), 1e-9);
}

void smooth_velocities(std::span<FilterBankStep> steps, std::span<const Observation> series,
                       int half_window) {
  if (half_window < 0) throw InvalidArgument("half_window must be nonnegative");
  if (half_window == 0) return;
  if (steps.size() + 1 != series.size()) throw InvalidArgument("steps do not match the series");
  const auto n = static_cast<long>(series.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const long k = static_cast<long>(i) + 1;
    const long lo = std::max(0L, k - half_window);
    const long hi = std::min(n - 1, k + half_window);
    const auto& a = series[static_cast<std::size_t>(lo)];
    const auto& b = series[static_cast<std::size_t>(hi)];
    steps[i].state_estimate.mean.tail<2>() = (b.z - a.z) / (b.t - a.t);
  }
}

FitResult fit_normality(std::span<const Observation> series, const FitConfig& config,
                        const std::optional<ModelBank>& initial) {
  if (config.max_iterations < 0) throw InvalidArgument("max_iterations must be nonnegative");
  FitResult result;
  if (initial) {
    result.bank = *initial;
    result.bank.validate();
  } else {
    const double psi0 = config.bootstrap_psi
                            ? *config.bootstrap_psi
                            : calibrate_bootstrap_psi(config.noise, config.calibration_window,
                                                      config.calibration_seed);
    result.bank = make_initial_bank(config.noise, psi0);
  }

  for (int iteration = 0;; ++iteration) {
    auto steps = run_filter_bank(result.bank, series);
    smooth_velocities(steps, series, config.velocity_half_window);
    const auto mask = abnormal_mask(steps, result.bank);
    const double frac = static_cast<double>(std::count(mask.begin(), mask.end(), true)) /
                        static_cast<double>(mask.size());
    result.abnormal_fraction.push_back(frac);
    result.unexplained_fraction = frac;

    auto segments = detect_abnormal_segments(steps, result.bank, config.gap_min);
    std::erase_if(segments, [&](const AbnormalSegment& s) {
      return s.size() < config.learn.min_states;
    });
    if (segments.empty()) {
      result.converged = true;
      break;
    }
    if (iteration >= config.max_iterations) break;
    // The last model did not explain anything new; another one would be a copy.
    if (config.stop_on_stall && iteration > 0 &&
        !(frac < result.abnormal_fraction[result.abnormal_fraction.size() - 2])) {
      break;
    }

    if (config.per_segment_models) {
      for (const auto& seg : segments) {
        const int id = static_cast<int>(result.bank.models.size());
        result.bank.models.push_back(learn_model(seg.states, config.learn, id));
      }
    } else {
      std::vector<std::vector<AgentState>> pooled;
      for (auto& seg : segments) pooled.push_back(std::move(seg.states));
      const int id = static_cast<int>(result.bank.models.size());
      result.bank.models.push_back(learn_model(pooled, config.learn, id));
    }
    ++result.learning_iterations;
  }
  return result;
}

}  // namespace trajsa
