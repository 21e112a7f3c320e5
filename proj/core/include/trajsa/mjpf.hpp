#pragma once

#include "trajsa/kalman.hpp"
#include "trajsa/learner.hpp"
#include "trajsa/model.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace trajsa {

struct MjpfConfig {
  std::size_t n_particles = 50;
  std::uint64_t seed = 1;
  /// Resample when ESS < resample_threshold * N.
  double resample_threshold = 0.5;
  double dummy_enter_factor = 1.0;
  double dummy_exit_factor = 0.8;
  InnovationNorm norm = InnovationNorm::Mahalanobis;
  /// Weight particles by how well their position fits the sampled super-state.
  bool membership_likelihood = true;
  /// Membership of a DUMMY particle, in standard deviations.
  double dummy_membership_sigma = 3.0;

  void validate() const;
};

struct Particle {
  int model_id = 0;
  int super_state_id = 0;  // or kDummySuperState
  int dwell = 1;
  GaussianBelief belief;
  double weight = 0.0;
  /// Posterior position before the last prediction, for the velocity estimate.
  Vec2 previous_position = Vec2::Zero();
  double last_dt = 0.0;

  bool is_dummy() const { return super_state_id == kDummySuperState; }
};

struct ParticleSet {
  std::vector<Particle> particles;
  std::mt19937_64 rng;

  double effective_sample_size() const;
};

/// Allocates particles to (model, super-state) pairs in proportion to member
/// counts with seeded systematic sampling. Model 0 only receives particles
/// when the bank has no learned model. Beliefs start at z0 with the
/// super-state control velocity and spread; weights are uniform.
ParticleSet mjpf_init(const ModelBank& bank, const Observation& z0, const MjpfConfig& config);

/// Draws each particle's next super-state from its model's dwell-binned
/// transition row and runs the Kalman prediction with that control. A row whose
/// dwell bin saw no transitions during learning falls back to the nearest bin
/// that did.
void predict_step(ParticleSet& ps, const ModelBank& bank, double dt);

/// Kalman update of every particle against `z`, weight update, abnormality
/// signal (median of per-particle innovation norms), DUMMY switching, and
/// systematic resampling when the effective sample size drops.
AbnormalitySample update_step(ParticleSet& ps, const Observation& z, const ModelBank& bank,
                              const MjpfConfig& config);

/// Full online pass: one sample per observation after the first.
std::vector<AbnormalitySample> run_mjpf(const ModelBank& bank, std::span<const Observation> series,
                                        const MjpfConfig& config);

/// Systematic resampling with offset u0 in [0, 1/N); returns parent indices.
std::vector<std::size_t> systematic_resample(std::span<const double> weights, double u0);

/// Median with mean-of-middle-two for even counts.
double median(std::vector<double> values);

/// Detection threshold learned from a normal run: certainty threshold of the
/// signal values the bank produces on its own training series.
double calibrate_signal_threshold(const ModelBank& bank, std::span<const Observation> series,
                                  const MjpfConfig& config);

}  // namespace trajsa
