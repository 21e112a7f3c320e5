#include "trajsa/som.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace trajsa {

double SomConfig::initial_sigma() const {
  return sigma0 > 0.0 ? sigma0 : 0.5 * static_cast<double>(std::max(rows, cols));
}

void SomConfig::validate() const {
  if (rows < 1 || cols < 1 || rows * cols < 2) {
    throw InvalidArgument("SOM grid needs at least two neurons");
  }
  if (epochs < 1) throw InvalidArgument("SOM needs at least one epoch");
  if (!(lr0 > 0.0 && lr0 <= 1.0)) throw InvalidArgument("SOM lr0 must lie in (0, 1]");
  if (!(initial_sigma() > 0.0)) throw InvalidArgument("SOM sigma0 must be positive");
  weights.validate();
}

namespace {

std::size_t best_unit(const AgentState& x, const std::vector<AgentState>& neurons,
                      const DistanceWeights& w, double* best_sq) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    const double d = weighted_distance_sq(x, neurons[i], w);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  if (best_sq) *best_sq = best_d;
  return best;
}

}  // namespace

SomMap som_train(std::span<const AgentState> samples, const SomConfig& config,
                 std::vector<double>* qe_trace) {
  config.validate();
  if (samples.empty()) throw InvalidArgument("SOM training needs at least one sample");
  for (const auto& s : samples) {
    if (!s.allFinite()) throw InvalidArgument("SOM samples must be finite");
  }

  const auto n_neurons = static_cast<std::size_t>(config.rows * config.cols);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);

  SomMap map;
  map.config = config;
  map.neurons.reserve(n_neurons);
  for (std::size_t i = 0; i < n_neurons; ++i) map.neurons.push_back(samples[pick(rng)]);

  // Squared grid distances between every pair of neurons.
  std::vector<double> grid_sq(n_neurons * n_neurons);
  for (std::size_t a = 0; a < n_neurons; ++a) {
    const int ra = static_cast<int>(a) / config.cols, ca = static_cast<int>(a) % config.cols;
    for (std::size_t b = 0; b < n_neurons; ++b) {
      const int rb = static_cast<int>(b) / config.cols, cb = static_cast<int>(b) % config.cols;
      grid_sq[a * n_neurons + b] = static_cast<double>((ra - rb) * (ra - rb) + (ca - cb) * (ca - cb));
    }
  }

  const double sigma0 = config.initial_sigma();
  const double epochs = static_cast<double>(config.epochs);
  const double tau_sigma = sigma0 > 1.0 ? epochs / std::log(sigma0) : epochs;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> h(n_neurons);
  const double per_sample = 1.0 / static_cast<double>(samples.size());

  // Sequential updates make the epoch-end error fluctuate; keep the best map.
  std::vector<AgentState> best_neurons;
  double best_qe = std::numeric_limits<double>::infinity();
  if (qe_trace) qe_trace->clear();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < order.size(); ++k) {
      const double s = static_cast<double>(epoch) + static_cast<double>(k) * per_sample;
      const double lr = config.lr0 * std::exp(-s / epochs);
      const double sigma = sigma0 * std::exp(-s / tau_sigma);
      const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);

      const AgentState& x = samples[order[k]];
      const std::size_t bmu = best_unit(x, map.neurons, config.weights, nullptr);
      const double* row = &grid_sq[bmu * n_neurons];
      for (std::size_t i = 0; i < n_neurons; ++i) {
        const double hi = std::exp(-row[i] * inv_two_sigma_sq);
        if (hi < 1e-12) continue;
        map.neurons[i] += (lr * hi) * (x - map.neurons[i]);
      }
    }
    const double qe = quantization_error(samples, map);
    if (qe < best_qe) {
      best_qe = qe;
      best_neurons = map.neurons;
    }
    if (qe_trace) qe_trace->push_back(best_qe);
  }
  map.neurons = std::move(best_neurons);
  return map;
}

SomAssignment som_assign(const AgentState& x, const SomMap& map) {
  if (map.neurons.empty()) throw InvalidArgument("SOM map has no neurons");
  double d_sq = 0.0;
  const std::size_t idx = best_unit(x, map.neurons, map.config.weights, &d_sq);
  return {idx, std::sqrt(d_sq)};
}

double quantization_error(std::span<const AgentState> samples, const SomMap& map) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) total += som_assign(s, map).distance;
  return total / static_cast<double>(samples.size());
}

std::vector<SuperState> extract_superstates(const SomMap& map,
                                            std::span<const AgentState> samples,
                                            std::vector<int>* labels) {
  if (samples.empty()) throw InvalidArgument("super-state extraction needs samples");
  const std::size_t n = map.neurons.size();
  std::vector<std::size_t> bmu(samples.size());
  std::vector<std::size_t> count(n, 0);
  std::vector<Vec4> sum(n, Vec4::Zero());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    bmu[i] = som_assign(samples[i], map).neuron;
    ++count[bmu[i]];
    sum[bmu[i]] += samples[i];
  }

  std::vector<int> dense(n, -1);
  std::vector<SuperState> states;
  for (std::size_t j = 0; j < n; ++j) {
    if (count[j] == 0) continue;
    SuperState s;
    s.id = static_cast<int>(states.size());
    s.member_count = count[j];
    s.centroid = sum[j] / static_cast<double>(count[j]);
    s.control_u = velocity(s.centroid);
    dense[j] = s.id;
    states.push_back(s);
  }
  if (states.empty()) throw InvalidArgument("every SOM neuron is empty");

  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& s = states[static_cast<std::size_t>(dense[bmu[i]])];
    const Vec4 d = samples[i] - s.centroid;
    s.spread += d * d.transpose();
  }
  for (auto& s : states) s.spread /= static_cast<double>(s.member_count);

  if (labels) {
    labels->resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) (*labels)[i] = dense[bmu[i]];
  }
  return states;
}

double vocabulary_threshold(std::span<const SuperState> states, const DistanceWeights& weights) {
  if (states.empty()) throw InvalidArgument("vocabulary threshold needs super-states");
  weights.validate();
  if (states.size() == 1) return 3.0 * std::sqrt(std::max(0.0, states.front().spread.trace()));

  std::vector<double> nearest(states.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      const double d = std::sqrt(weighted_distance_sq(states[i].centroid, states[j].centroid, weights));
      nearest[i] = std::min(nearest[i], d);
      nearest[j] = std::min(nearest[j], d);
    }
  }
  return certainty_threshold(nearest);
}

}  // namespace trajsa
