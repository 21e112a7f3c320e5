#include "trajsa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trajsa {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw InvalidArgument("scores must be finite");
    pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("AUC needs both positive and negative samples");

  // Rank-sum form with mid-ranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum += mid_rank;
    }
    i = j + 1;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

BinarySamples samples_to_binary(std::span<const AbnormalitySample> samples,
                                std::span<const LabeledWindow> windows) {
  BinarySamples out;
  out.scores.reserve(samples.size());
  out.labels.reserve(samples.size());
  for (const auto& s : samples) {
    const auto w = std::find_if(windows.begin(), windows.end(),
                                [&](const LabeledWindow& lw) { return lw.contains(s.t); });
    if (w == windows.end()) {
      throw DataError("sample at t=" + std::to_string(s.t) + " is not covered by any window");
    }
    out.scores.push_back(s.signal);
    out.labels.push_back(w->label == WindowLabel::Abnormal ? 1 : 0);
  }
  return out;
}

double EventReport::mean_latency() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (double l : latencies) {
    if (std::isnan(l)) continue;
    sum += l;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

EventReport event_detection(std::span<const AbnormalitySample> samples,
                            std::span<const LabeledWindow> windows, double threshold,
                            std::size_t min_run) {
  if (!(threshold > 0.0)) throw InvalidArgument("event threshold must be positive");
  if (min_run < 1) throw InvalidArgument("min_run must be >= 1");
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  auto in_abnormal = [&](double t) {
    return std::any_of(windows.begin(), windows.end(), [&](const LabeledWindow& w) {
      return w.label == WindowLabel::Abnormal && w.contains(t);
    });
  };

  EventReport report;
  for (const auto& w : windows) {
    if (w.label != WindowLabel::Abnormal) continue;
    ++report.abnormal_windows;
    double latency = kNaN;
    std::size_t run = 0;
    for (const auto& s : samples) {
      if (!w.contains(s.t)) continue;
      run = s.signal > threshold ? run + 1 : 0;
      if (run == min_run) {
        // First sample of the confirming run.
        const auto idx = static_cast<std::size_t>(&s - samples.data()) - (min_run - 1);
        latency = samples[idx].t - w.start;
        break;
      }
    }
    if (!std::isnan(latency)) ++report.detected_windows;
    report.latencies.push_back(latency);
  }

  std::size_t k = 0;
  while (k < samples.size()) {
    if (!(samples[k].signal > threshold)) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end + 1 < samples.size() && samples[end + 1].signal > threshold) ++end;
    if (end - k + 1 >= min_run) {
      bool overlaps = false;
      for (std::size_t i = k; i <= end && !overlaps; ++i) overlaps = in_abnormal(samples[i].t);
      overlaps ? ++report.true_events : ++report.false_events;
    }
    k = end + 1;
  }

  report.recall = report.abnormal_windows == 0
                      ? kNaN
                      : static_cast<double>(report.detected_windows) /
                            static_cast<double>(report.abnormal_windows);
  const std::size_t events = report.true_events + report.false_events;
  report.precision =
      events == 0 ? kNaN : static_cast<double>(report.true_events) / static_cast<double>(events);
  return report;
}

}  // namespace trajsa
