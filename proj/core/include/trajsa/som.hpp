#pragma once

#include "trajsa/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace trajsa {

struct SomConfig {
  int rows = 11;
  int cols = 11;
  int epochs = 100;
  double lr0 = 0.5;
  /// Initial neighborhood radius in grid units; <= 0 selects max(rows, cols) / 2.
  double sigma0 = 0.0;
  DistanceWeights weights;
  std::uint64_t seed = 1;

  double initial_sigma() const;
  void validate() const;
};

struct SomMap {
  std::vector<AgentState> neurons;  // row-major over the grid
  SomConfig config;
};

struct SomAssignment {
  std::size_t neuron = 0;
  double distance = 0.0;
};

/// Sequential Kohonen training under the weighted state distance.
///
/// Neurons start at seeded draws from the samples. Each epoch presents the
/// samples in a freshly shuffled order; at fractional epoch s the learning rate
/// is lr0 * exp(-s / epochs) and the Gaussian neighborhood radius is
/// sigma0 * exp(-s / tau) with tau = epochs / ln(sigma0). The returned map is
/// the epoch-end map with the lowest quantization error (earliest on ties); if
/// `qe_trace` is given it receives, per epoch, the error of the map that would
/// be returned had training stopped there.
SomMap som_train(std::span<const AgentState> samples, const SomConfig& config,
                 std::vector<double>* qe_trace = nullptr);

/// Best-matching neuron; ties go to the lowest index.
SomAssignment som_assign(const AgentState& x, const SomMap& map);

/// Mean best-matching distance over `samples`.
double quantization_error(std::span<const AgentState> samples, const SomMap& map);

/// Turns the non-empty neurons of `map` into super-states with dense ids.
/// `labels`, when given, receives the super-state id of every sample.
std::vector<SuperState> extract_superstates(const SomMap& map,
                                            std::span<const AgentState> samples,
                                            std::vector<int>* labels = nullptr);

/// Validity radius of a vocabulary: certainty threshold over each centroid's
/// nearest-neighbor distance. A single super-state falls back to
/// 3 * sqrt(trace(spread)).
double vocabulary_threshold(std::span<const SuperState> states, const DistanceWeights& weights);

}  // namespace trajsa
