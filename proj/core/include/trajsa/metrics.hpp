#pragma once

#include "trajsa/model.hpp"

#include <span>
#include <vector>

namespace trajsa {

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counted 1/2. Throws InvalidArgument on length mismatch or one class.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct BinarySamples {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Label 1 iff the sample time lies inside an abnormal window. Throws
/// DataError when a timestamp is covered by no window.
BinarySamples samples_to_binary(std::span<const AbnormalitySample> samples,
                                std::span<const LabeledWindow> windows);

struct EventReport {
  double recall = 0.0;
  /// NaN when no event run was raised at all.
  double precision = 0.0;
  /// Seconds from window start to the first confirmed sample; NaN if missed.
  std::vector<double> latencies;
  std::size_t abnormal_windows = 0;
  std::size_t detected_windows = 0;
  std::size_t true_events = 0;
  std::size_t false_events = 0;

  double mean_latency() const;
};

/// Event-level scoring. A run of at least `min_run` consecutive samples above
/// `threshold` is an event; it is true if any of its samples falls inside an
/// abnormal window and false otherwise. A window counts as detected when
/// `min_run` consecutive samples inside it exceed the threshold.
EventReport event_detection(std::span<const AbnormalitySample> samples,
                            std::span<const LabeledWindow> windows, double threshold,
                            std::size_t min_run = 3);

}  // namespace trajsa
