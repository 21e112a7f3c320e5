#pragma once

#include "trajsa/model.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace trajsa {

enum class ScenarioKind { Perimeter, UTurn, EmergencyStop };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& text);

/// A vehicle circulating counter-clockwise on a rounded rectangle
/// [0, rect_w] x [0, rect_h], starting at (corner_radius, 0) heading +x.
/// Events happen on the bottom edge of lap `event_lap` (1-based) at fraction
/// `event_position` of the straight part.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Perimeter;
  int laps = 3;
  double speed = 2.0;
  double rect_w = 40.0;
  double rect_h = 20.0;
  double corner_radius = 2.0;
  double dt = 0.11;
  double noise_std = 0.05;
  int event_lap = 2;
  double event_position = 0.5;
  /// EmergencyStop: hold time and braking / acceleration magnitude.
  double stop_duration = 5.0;
  double stop_accel = 3.0;
  /// UTurn: radius of the reversal half-circle and travel time after it.
  double uturn_radius = 2.0;
  double post_event_time = 2.0;
  std::uint64_t seed = 1;

  /// Throws InvalidArgument when the geometry or timing is infeasible.
  void validate() const;
  /// Length of one lap of the rounded rectangle.
  double lap_length() const;
};

struct Scenario {
  std::vector<Observation> observations;
  std::vector<LabeledWindow> windows;
  /// Noise-free positions matching `observations`.
  std::vector<Vec2> truth;
};

Scenario generate(const ScenarioSpec& spec);

/// Noise-free position at time t (clamped to the scenario duration).
Vec2 true_position(const ScenarioSpec& spec, double t);

/// Total scenario duration in seconds.
double scenario_duration(const ScenarioSpec& spec);

/// Perimeter, UTurn and EmergencyStop with the shipped defaults (events on lap 2).
std::array<ScenarioSpec, 3> default_specs();

}  // namespace trajsa
