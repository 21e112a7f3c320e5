#pragma once

// Independent reference implementations used only by tests. They are written
// for clarity, not speed, and share no code with the library.

#include "trajsa/model.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace trajsa::oracle {

inline double mean_plus_three_sigma(const std::vector<double>& d) {
  double sum = 0.0;
  for (double x : d) sum += x;
  const double mean = sum / static_cast<double>(d.size());
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  return mean + 3.0 * std::sqrt(ss / static_cast<double>(d.size()));
}

/// Dwell-binned transition counts by direct enumeration.
/// counts[bin][from][to]; bins follow the edges exactly as documented:
/// [1, e0), [e0, e1), ..., [e_last, inf).
inline std::vector<std::vector<std::vector<double>>> count_transitions(
    const std::vector<std::vector<int>>& seqs, std::size_t L, const std::vector<int>& edges) {
  std::vector<std::vector<std::vector<double>>> c(
      edges.size() + 1, std::vector<std::vector<double>>(L, std::vector<double>(L, 0.0)));
  for (const auto& s : seqs) {
    int dwell = 1;
    for (std::size_t k = 1; k < s.size(); ++k) {
      std::size_t bin = 0;
      while (bin < edges.size() && dwell >= edges[bin]) ++bin;
      c[bin][static_cast<std::size_t>(s[k - 1])][static_cast<std::size_t>(s[k])] += 1.0;
      dwell = s[k] == s[k - 1] ? dwell + 1 : 1;
    }
  }
  return c;
}

inline std::vector<std::vector<std::vector<double>>> normalize(
    const std::vector<std::vector<std::vector<double>>>& counts, double lambda) {
  auto p = counts;
  for (auto& m : p) {
    const double L = static_cast<double>(m.size());
    for (auto& row : m) {
      double total = 0.0;
      for (double x : row) total += x;
      for (double& x : row) x = total == 0.0 ? 1.0 / L : (x + lambda) / (total + lambda * L);
    }
  }
  return p;
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

/// 97.5% and 2.5% quantiles of chi-square with 2 degrees of freedom:
/// -2 ln(0.025) and -2 ln(0.975).
inline constexpr double kChi2Dof2Upper = 7.377758908227871;
inline constexpr double kChi2Dof2Lower = 0.050635615968579795;

}  // namespace trajsa::oracle
