#pragma once

#include "trajsa/kalman.hpp"
#include "trajsa/model.hpp"
#include "trajsa/som.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace trajsa {

/// The learned models. Model 0 is the unmotivated model: one super-state with
/// zero control, valid everywhere, whose psi is the bootstrap threshold.
struct ModelBank {
  std::vector<SlModel> models;
  NoiseParams noise;
  /// Detection threshold for the online abnormality signal (0 until calibrated).
  double signal_threshold = 0.0;

  void validate() const;
};

/// Bank holding only the unmotivated model.
ModelBank make_initial_bank(const NoiseParams& noise, double bootstrap_psi);

struct FilterBankStep {
  double t = 0.0;
  std::vector<double> per_model_error;
  std::vector<int> per_model_super_state;
  int best_model = 0;
  int best_super_state = 0;
  /// Observed position with the winning model's velocity estimate.
  GaussianBelief state_estimate;
};

/// Runs every model of the bank over the series in parallel. Each model keeps
/// its own Kalman filter; before each prediction the model picks the super-state
/// nearest to its current [position, velocity] estimate, or the random filter
/// (DUMMY) when that distance exceeds psi. The per-model error is the velocity
/// correction the Kalman update applies, |(K eps)_pos| / dt, i.e. the innovation
/// velocity weighted by the filter gain. The winner is the argmin (ties to the
/// lowest model id). One step is produced per observation after the first.
std::vector<FilterBankStep> run_filter_bank(const ModelBank& bank,
                                            std::span<const Observation> series);

struct AbnormalSegment {
  std::size_t first = 0;  // inclusive step index
  std::size_t last = 0;   // inclusive step index
  std::vector<AgentState> states;

  std::size_t size() const { return last - first + 1; }
};

/// Step k is abnormal when its winning error exceeds the winning model's psi.
std::vector<bool> abnormal_mask(std::span<const FilterBankStep> steps, const ModelBank& bank);

/// Groups abnormal steps into runs, merging runs separated by fewer than
/// `gap_min` normal steps. Merged gaps are included in the segment.
std::vector<AbnormalSegment> detect_abnormal_segments(std::span<const FilterBankStep> steps,
                                                      const ModelBank& bank, int gap_min = 5);

/// Counts dwell-binned transitions of each sequence (transitions never cross
/// sequence boundaries) and normalizes each row with additive smoothing:
/// p = (count + lambda) / (row_total + lambda * L). Rows without observations
/// are uniform.
TransitionTensor estimate_transitions(std::span<const std::vector<int>> sequences, std::size_t L,
                                      std::span<const int> dwell_edges, double smoothing);
TransitionTensor estimate_transitions(std::span<const int> assignments, std::size_t L,
                                      std::span<const int> dwell_edges, double smoothing);

/// Offline re-estimate of each step's velocity as the centered difference of
/// the observations k-h and k+h (one-sided at the series ends). Filtering
/// lags the true velocity on curves; the centered form does not.
void smooth_velocities(std::span<FilterBankStep> steps, std::span<const Observation> series,
                       int half_window);

struct LearnConfig {
  SomConfig som;
  std::vector<int> dwell_edges{10, 20, 30, 40};
  double smoothing = 0.0;
  std::size_t min_states = 10;
  /// Lower bound applied to a vocabulary's psi.
  double psi_floor = 1e-3;
  /// The SOM grid is shrunk (same aspect) until it has at most
  /// n_samples / samples_per_neuron neurons; 0 keeps the configured grid.
  double samples_per_neuron = 5.0;
};

/// SOM settings learn_model uses for `n_samples` training states.
SomConfig fitted_som_config(const LearnConfig& config, std::size_t n_samples);

/// Learns one switching model from time-ordered segments of abnormal states:
/// SOM, super-states, psi, and dwell-time transitions counted within segments.
SlModel learn_model(std::span<const std::vector<AgentState>> segments, const LearnConfig& config,
                    int model_id);
SlModel learn_model(std::span<const AgentState> states, const LearnConfig& config, int model_id);

struct FitConfig {
  NoiseParams noise = NoiseParams::defaults();
  LearnConfig learn;
  int gap_min = 5;
  int max_iterations = 8;
  bool per_segment_models = false;
  /// Bootstrap threshold for model 0; calibrated from a still segment when unset.
  std::optional<double> bootstrap_psi;
  int calibration_window = 50;
  std::uint64_t calibration_seed = 7;
  /// Half width (steps) of the centered difference that replaces the causal
  /// velocity estimate of the states handed to learning; 0 keeps the filter's.
  int velocity_half_window = 3;
  /// Stop early (not converged) when an iteration's new model left the
  /// abnormal fraction unchanged.
  bool stop_on_stall = true;
};

struct FitResult {
  ModelBank bank;
  int learning_iterations = 0;
  bool converged = false;
  /// Fraction of abnormal steps seen at the start of every iteration.
  std::vector<double> abnormal_fraction;
  /// Abnormal fraction of the final bank on the training series.
  double unexplained_fraction = 0.0;
};

/// mean + 3 std of model 0's error over a still segment. Uses `still` when it
/// holds at least two observations, else a synthetic still segment drawn from
/// the measurement noise.
double calibrate_bootstrap_psi(const NoiseParams& noise, int window, std::uint64_t seed,
                               std::span<const Observation> still = {});

/// The offline loop: run the bank, collect abnormal segments of at least
/// `min_states` steps, learn a new model from them, repeat until nothing is
/// abnormal or `max_iterations` is reached. Learning continues from `initial`
/// when given; otherwise from the unmotivated model alone.
FitResult fit_normality(std::span<const Observation> series, const FitConfig& config,
                        const std::optional<ModelBank>& initial = std::nullopt);

}  // namespace trajsa
