#include "trajsa/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace trajsa {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Perimeter:
      return "perimeter";
    case ScenarioKind::UTurn:
      return "uturn";
    case ScenarioKind::EmergencyStop:
      return "estop";
  }
  return "perimeter";
}

ScenarioKind parse_scenario_kind(const std::string& text) {
  if (text == "perimeter") return ScenarioKind::Perimeter;
  if (text == "uturn" || text == "u-turn") return ScenarioKind::UTurn;
  if (text == "estop" || text == "emergency-stop" || text == "stop") {
    return ScenarioKind::EmergencyStop;
  }
  throw InvalidArgument("unknown scenario '" + text + "'");
}

namespace {

constexpr double kPi = std::numbers::pi;

double straight_w(const ScenarioSpec& s) { return s.rect_w - 2.0 * s.corner_radius; }
double straight_h(const ScenarioSpec& s) { return s.rect_h - 2.0 * s.corner_radius; }

/// One timed piece of motion: a straight line with constant acceleration, a
/// constant-speed arc, or a hold.
struct Piece {
  enum class Kind { Line, Arc } kind = Kind::Line;
  double duration = 0.0;
  WindowLabel label = WindowLabel::Linear;
  // Line: p0 + dir * (v0 * tau + 0.5 * accel * tau^2)
  Vec2 p0 = Vec2::Zero();
  Vec2 dir = Vec2::UnitX();
  double v0 = 0.0;
  double accel = 0.0;
  // Arc: center + radius * (cos th, sin th), th = theta0 + omega * tau
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double theta0 = 0.0;
  double omega = 0.0;

  Vec2 at(double tau) const {
    if (kind == Kind::Line) return p0 + dir * (v0 * tau + 0.5 * accel * tau * tau);
    const double th = theta0 + omega * tau;
    return center + radius * Vec2(std::cos(th), std::sin(th));
  }
};

Piece line(const Vec2& p0, const Vec2& dir, double length, double speed, WindowLabel label) {
  Piece p;
  p.kind = Piece::Kind::Line;
  p.p0 = p0;
  p.dir = dir;
  p.v0 = speed;
  p.duration = length / speed;
  p.label = label;
  return p;
}

Piece ramp(const Vec2& p0, const Vec2& dir, double v0, double accel, double duration) {
  Piece p;
  p.kind = Piece::Kind::Line;
  p.p0 = p0;
  p.dir = dir;
  p.v0 = v0;
  p.accel = accel;
  p.duration = duration;
  p.label = WindowLabel::Linear;
  return p;
}

Piece hold(const Vec2& at, double duration, WindowLabel label) {
  Piece p = ramp(at, Vec2::UnitX(), 0.0, 0.0, duration);
  p.label = label;
  return p;
}

Piece arc(const Vec2& center, double radius, double theta0, double sweep, double speed,
          WindowLabel label) {
  Piece p;
  p.kind = Piece::Kind::Arc;
  p.center = center;
  p.radius = radius;
  p.theta0 = theta0;
  p.omega = (sweep > 0 ? 1.0 : -1.0) * speed / radius;
  p.duration = std::abs(sweep) * radius / speed;
  p.label = label;
  return p;
}

/// The lap after the bottom edge: right corner through the bottom-left corner.
void append_lap_tail(const ScenarioSpec& s, std::vector<Piece>& out) {
  const double r = s.corner_radius, w = s.rect_w, h = s.rect_h, v = s.speed;
  out.push_back(arc({w - r, r}, r, -kPi / 2, kPi / 2, v, WindowLabel::Curve));
  out.push_back(line({w, r}, Vec2::UnitY(), straight_h(s), v, WindowLabel::Linear));
  out.push_back(arc({w - r, h - r}, r, 0.0, kPi / 2, v, WindowLabel::Curve));
  out.push_back(line({w - r, h}, -Vec2::UnitX(), straight_w(s), v, WindowLabel::Linear));
  out.push_back(arc({r, h - r}, r, kPi / 2, kPi / 2, v, WindowLabel::Curve));
  out.push_back(line({0.0, h - r}, -Vec2::UnitY(), straight_h(s), v, WindowLabel::Linear));
  out.push_back(arc({r, r}, r, kPi, kPi / 2, v, WindowLabel::Curve));
}

std::vector<Piece> build_pieces(const ScenarioSpec& s) {
  s.validate();
  const double r = s.corner_radius, v = s.speed;
  const Vec2 start(r, 0.0);
  std::vector<Piece> pieces;

  for (int lap = 1; lap <= s.laps; ++lap) {
    const bool event = s.kind != ScenarioKind::Perimeter && lap == s.event_lap;
    if (!event) {
      pieces.push_back(line(start, Vec2::UnitX(), straight_w(s), v, WindowLabel::Linear));
      append_lap_tail(s, pieces);
      continue;
    }

    const double x_event = s.event_position * straight_w(s);
    if (x_event > 0.0) pieces.push_back(line(start, Vec2::UnitX(), x_event, v, WindowLabel::Linear));
    const Vec2 p_event = start + Vec2(x_event, 0.0);

    if (s.kind == ScenarioKind::UTurn) {
      // Left half-circle into the interior, then opposite-direction travel.
      const double ru = s.uturn_radius;
      pieces.push_back(arc(p_event + Vec2(0.0, ru), ru, -kPi / 2, kPi, v, WindowLabel::Abnormal));
      pieces.push_back(line(p_event + Vec2(0.0, 2.0 * ru), -Vec2::UnitX(), v * s.post_event_time, v,
                            WindowLabel::Linear));
      return pieces;
    }

    const double t_brake = v / s.stop_accel;
    const double d_brake = 0.5 * v * t_brake;
    pieces.push_back(ramp(p_event, Vec2::UnitX(), v, -s.stop_accel, t_brake));
    const Vec2 p_stop = p_event + Vec2(d_brake, 0.0);
    pieces.push_back(hold(p_stop, s.stop_duration, WindowLabel::Abnormal));
    pieces.push_back(ramp(p_stop, Vec2::UnitX(), 0.0, s.stop_accel, t_brake));
    const Vec2 p_go = p_stop + Vec2(d_brake, 0.0);
    const double rest = straight_w(s) - x_event - 2.0 * d_brake;
    if (rest > 0.0) pieces.push_back(line(p_go, Vec2::UnitX(), rest, v, WindowLabel::Linear));
    append_lap_tail(s, pieces);
  }
  return pieces;
}

double total_duration(const std::vector<Piece>& pieces) {
  double t = 0.0;
  for (const auto& p : pieces) t += p.duration;
  return t;
}

Vec2 evaluate(const std::vector<Piece>& pieces, double t) {
  double start = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const double end = start + pieces[i].duration;
    if (t < end || i + 1 == pieces.size()) {
      return pieces[i].at(std::clamp(t - start, 0.0, pieces[i].duration));
    }
    start = end;
  }
  return Vec2::Zero();
}

}  // namespace

void ScenarioSpec::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("infeasible scenario: " + what); };
  if (!(speed > 0.0)) fail("speed must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (laps < 1) fail("laps must be >= 1");
  if (!(corner_radius > 0.0)) fail("corner radius must be positive");
  if (!(rect_w > 2.0 * corner_radius) || !(rect_h > 2.0 * corner_radius)) {
    fail("rectangle must exceed twice the corner radius");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) fail("noise_std must be >= 0");
  if (kind == ScenarioKind::Perimeter) return;
  if (event_lap < 1 || event_lap > laps) fail("event_lap must lie in [1, laps]");
  if (!(event_position >= 0.0 && event_position < 1.0)) fail("event_position must lie in [0, 1)");
  if (kind == ScenarioKind::UTurn) {
    if (!(uturn_radius > 0.0) || !(2.0 * uturn_radius < rect_h)) {
      fail("u-turn diameter must fit inside the rectangle");
    }
    if (!(post_event_time >= 0.0)) fail("post_event_time must be >= 0");
    if (speed * post_event_time > rect_w) fail("post-event travel leaves the rectangle");
  } else {
    if (!(stop_duration > 0.0)) fail("stop_duration must be positive");
    if (!(stop_accel > 0.0)) fail("stop_accel must be positive");
    const double braking = speed * speed / stop_accel;  // brake + restart distance
    if (event_position * (rect_w - 2.0 * corner_radius) + braking > rect_w - 2.0 * corner_radius) {
      fail("stop maneuver does not fit on the edge");
    }
  }
}

double ScenarioSpec::lap_length() const {
  return 2.0 * (rect_w - 2.0 * corner_radius) + 2.0 * (rect_h - 2.0 * corner_radius) +
         2.0 * kPi * corner_radius;
}

Vec2 true_position(const ScenarioSpec& spec, double t) { return evaluate(build_pieces(spec), t); }

double scenario_duration(const ScenarioSpec& spec) { return total_duration(build_pieces(spec)); }

Scenario generate(const ScenarioSpec& spec) {
  const auto pieces = build_pieces(spec);
  const double total = total_duration(pieces);
  const auto n = static_cast<std::size_t>(std::floor(total / spec.dt + 1e-9)) + 1;

  Scenario out;
  out.observations.reserve(n);
  out.truth.reserve(n);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * spec.dt;
    const Vec2 p = evaluate(pieces, t);
    out.truth.push_back(p);
    Vec2 z = p;
    if (spec.noise_std > 0.0) {
      const double a = gauss(rng);
      const double b = gauss(rng);
      z += spec.noise_std * Vec2(a, b);
    }
    out.observations.push_back({t, z});
  }

  double start = 0.0;
  for (const auto& p : pieces) {
    const double end = start + p.duration;
    if (!out.windows.empty() && out.windows.back().label == p.label) {
      out.windows.back().end = end;
    } else {
      out.windows.push_back({start, end, p.label});
    }
    start = end;
  }
  // Keep the final sample inside the closed-open timeline.
  out.windows.back().end = std::max(out.windows.back().end, out.observations.back().t + spec.dt);
  return out;
}

std::array<ScenarioSpec, 3> default_specs() {
  ScenarioSpec perimeter;
  ScenarioSpec uturn = perimeter;
  uturn.kind = ScenarioKind::UTurn;
  ScenarioSpec estop = perimeter;
  estop.kind = ScenarioKind::EmergencyStop;
  return {perimeter, uturn, estop};
}

}  // namespace trajsa
