#include "cli.hpp"

#include "trajsa/io.hpp"
#include "trajsa/learner.hpp"
#include "trajsa/metrics.hpp"
#include "trajsa/mjpf.hpp"
#include "trajsa/simulator.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

namespace trajsa::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Thrown for flag combinations the parser cannot catch on its own.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f << text;
}

std::optional<json> read_json_if_exists(const fs::path& path) {
  std::ifstream f(path);
  if (!f) return std::nullopt;
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

fs::path meta_path(const fs::path& signal) { return fs::path(signal.string() + ".meta.json"); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt_or_na(double v, const char* spec = "{:.4f}") {
  return std::isfinite(v) ? fmt::format(fmt::runtime(spec), v) : std::string("undefined");
}

// --------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario = "perimeter";
  ScenarioSpec spec;
  std::string out_dir;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  app.add_option("--scenario", a.scenario, "perimeter | uturn | estop")->capture_default_str();
  app.add_option("--seed", a.spec.seed, "noise seed")->capture_default_str();
  app.add_option("--out", a.out_dir, "output directory")->required();
  app.add_option("--laps", a.spec.laps)->capture_default_str();
  app.add_option("--speed", a.spec.speed, "m/s")->capture_default_str();
  app.add_option("--width", a.spec.rect_w, "m")->capture_default_str();
  app.add_option("--height", a.spec.rect_h, "m")->capture_default_str();
  app.add_option("--corner-radius", a.spec.corner_radius, "m")->capture_default_str();
  app.add_option("--dt", a.spec.dt, "s")->capture_default_str();
  app.add_option("--noise", a.spec.noise_std, "position noise std, m")->capture_default_str();
  app.add_option("--event-lap", a.spec.event_lap)->capture_default_str();
  app.add_option("--event-position", a.spec.event_position, "fraction of the bottom edge")
      ->capture_default_str();
  app.add_option("--stop-duration", a.spec.stop_duration, "s")->capture_default_str();
  app.add_option("--stop-accel", a.spec.stop_accel, "m/s^2")->capture_default_str();
  app.add_option("--uturn-radius", a.spec.uturn_radius, "m")->capture_default_str();
  app.add_option("--post-event-time", a.spec.post_event_time, "s")->capture_default_str();
}

int run_simulate(SimulateArgs& a, std::ostream& out) {
  a.spec.kind = parse_scenario_kind(a.scenario);
  const Scenario sc = generate(a.spec);
  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
  io::write_trajectory_csv(dir / "trajectory.csv", sc.observations);
  io::write_labels_csv(dir / "labels.csv", sc.windows);
  const auto abnormal = std::count_if(sc.windows.begin(), sc.windows.end(), [](const LabeledWindow& w) {
    return w.label == WindowLabel::Abnormal;
  });
  out << fmt::format("wrote {} observations and {} windows ({} abnormal) to {}\n", sc.observations.size(),
                     sc.windows.size(), abnormal, dir.string());
  return kOk;
}

// --------------------------------------------------------------------------

struct LearnArgs {
  std::string input;
  std::string out;
  std::string still;
  io::LearnEcho echo;
  double bootstrap_psi = 0.0;
  bool calibrate_signal = true;
};

void add_learn(CLI::App& app, LearnArgs& a) {
  FitConfig& f = a.echo.fit;
  app.add_option("--input", a.input, "training trajectory CSV")->required();
  app.add_option("--out", a.out, "model bank JSON")->required();
  app.add_option("--som-rows", f.learn.som.rows)->capture_default_str();
  app.add_option("--som-cols", f.learn.som.cols)->capture_default_str();
  app.add_option("--som-epochs", f.learn.som.epochs)->capture_default_str();
  app.add_option("--som-lr", f.learn.som.lr0)->capture_default_str();
  app.add_option("--som-seed", f.learn.som.seed)->capture_default_str();
  app.add_option("--alpha", f.learn.som.weights.alpha, "velocity weight")->capture_default_str();
  app.add_option("--beta", f.learn.som.weights.beta, "position weight")->capture_default_str();
  app.add_option("--smoothing", f.learn.smoothing, "transition pseudo-count")->capture_default_str();
  app.add_option("--dwell-edges", f.learn.dwell_edges, "dwell bin edges in steps")->delimiter(',');
  app.add_option("--min-states", f.learn.min_states)->capture_default_str();
  app.add_option("--samples-per-neuron", f.learn.samples_per_neuron)->capture_default_str();
  app.add_option("--gap-min", f.gap_min)->capture_default_str();
  app.add_option("--max-iterations", f.max_iterations)->capture_default_str();
  app.add_flag("--per-segment-models", f.per_segment_models);
  app.add_option("--velocity-half-window", f.velocity_half_window)->capture_default_str();
  app.add_flag("!--no-stop-on-stall", f.stop_on_stall, "keep learning when a new model explains nothing new");
  app.add_option("--bootstrap-psi", a.bootstrap_psi, "fixed threshold of the unmotivated model");
  app.add_option("--still", a.still, "CSV of a still segment for the bootstrap threshold");
  app.add_option("--calibration-window", f.calibration_window)->capture_default_str();
  app.add_option("--calibration-seed", f.calibration_seed)->capture_default_str();
  app.add_option("--signal-particles", a.echo.calibration_particles,
                 "particles used to calibrate the detection threshold")
      ->capture_default_str();
  app.add_option("--signal-seed", a.echo.calibration_seed)->capture_default_str();
  app.add_flag("!--no-signal-threshold", a.calibrate_signal, "skip detection-threshold calibration");
}

int run_learn(LearnArgs& a, const CLI::App& app, std::ostream& out, std::ostream& err) {
  const auto series = io::read_trajectory_csv(fs::path(a.input));
  if (series.size() < 2) throw DataError(a.input + ": need at least two observations");
  FitConfig& fit = a.echo.fit;
  if (app.count("--bootstrap-psi") > 0) {
    if (!(a.bootstrap_psi > 0.0)) throw UsageError("--bootstrap-psi must be positive");
    fit.bootstrap_psi = a.bootstrap_psi;
  } else if (!a.still.empty()) {
    const auto still = io::read_trajectory_csv(fs::path(a.still));
    fit.bootstrap_psi =
        calibrate_bootstrap_psi(fit.noise, fit.calibration_window, fit.calibration_seed, still);
  }
  fit.learn.som.validate();

  FitResult result = fit_normality(series, fit);
  if (a.calibrate_signal && result.bank.models.size() > 1) {
    MjpfConfig mc;
    mc.n_particles = a.echo.calibration_particles;
    mc.seed = a.echo.calibration_seed;
    result.bank.signal_threshold = calibrate_signal_threshold(result.bank, series, mc);
  }

  io::BankDocument doc;
  doc.bank = result.bank;
  doc.config = a.echo;
  doc.diagnostics = {result.converged, result.learning_iterations, result.abnormal_fraction,
                     result.unexplained_fraction};
  io::save_bank(fs::path(a.out), doc);

  out << fmt::format("learned {} model(s) in {} iteration(s); unexplained fraction {:.4f}\n",
                     result.bank.models.size(), result.learning_iterations, result.unexplained_fraction);
  for (const auto& m : result.bank.models) {
    out << fmt::format("  model {}: {} super-state(s), psi {:.4f}\n", m.id, m.super_states.size(), m.psi);
  }
  out << fmt::format("detection threshold {:.4f}\n", result.bank.signal_threshold);
  if (!result.converged) {
    err << fmt::format("warning: learning did not converge after {} iteration(s); "
                       "{:.2f}% of steps remain unexplained\n",
                       result.learning_iterations, 100.0 * result.unexplained_fraction);
  }
  return kOk;
}

// --------------------------------------------------------------------------

struct DetectArgs {
  std::string model;
  std::string input;
  std::string out;
  std::string svg;
  std::string labels;
  std::string norm = "mahalanobis";
  MjpfConfig mjpf;
  double threshold = 0.0;
  bool timing = false;
};

void add_detect(CLI::App& app, DetectArgs& a) {
  app.add_option("--model", a.model, "model bank JSON")->required();
  app.add_option("--input", a.input, "test trajectory CSV")->required();
  app.add_option("--out", a.out, "signal CSV")->required();
  app.add_option("--particles", a.mjpf.n_particles)->capture_default_str();
  app.add_option("--seed", a.mjpf.seed)->capture_default_str();
  app.add_option("--threshold", a.threshold, "detection threshold (default: the bank's)");
  app.add_option("--norm", a.norm, "mahalanobis | euclidean")->capture_default_str();
  app.add_option("--resample-threshold", a.mjpf.resample_threshold)->capture_default_str();
  app.add_option("--dummy-enter", a.mjpf.dummy_enter_factor)->capture_default_str();
  app.add_option("--dummy-exit", a.mjpf.dummy_exit_factor)->capture_default_str();
  app.add_option("--svg", a.svg, "also write an SVG plot of the signal");
  app.add_option("--labels", a.labels, "labels CSV used to shade the SVG plot");
  app.add_flag("--timing", a.timing, "record per-step wall time in the meta file");
}

int run_detect(DetectArgs& a, const CLI::App& app, std::ostream& out) {
  if (a.norm == "mahalanobis") {
    a.mjpf.norm = InnovationNorm::Mahalanobis;
  } else if (a.norm == "euclidean") {
    a.mjpf.norm = InnovationNorm::Euclidean;
  } else {
    throw UsageError("--norm must be mahalanobis or euclidean");
  }
  a.mjpf.validate();
  const io::BankDocument doc = io::load_bank(fs::path(a.model));
  const auto series = io::read_trajectory_csv(fs::path(a.input));
  if (series.size() < 2) throw DataError(a.input + ": need at least two observations");

  double threshold = doc.bank.signal_threshold;
  if (app.count("--threshold") > 0) {
    if (!(a.threshold > 0.0)) throw UsageError("--threshold must be positive");
    threshold = a.threshold;
  }

  const ModelBank& bank = doc.bank;
  std::vector<double> step_ms;
  step_ms.reserve(series.size());
  std::vector<AbnormalitySample> samples;
  samples.reserve(series.size() - 1);
  ParticleSet ps = mjpf_init(bank, series.front(), a.mjpf);
  for (std::size_t k = 1; k < series.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    predict_step(ps, bank, step_dt(series[k - 1].t, series[k].t, bank.noise.dt_default));
    samples.push_back(update_step(ps, series[k], bank, a.mjpf));
    step_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }

  const fs::path out_path(a.out);
  io::write_signal_csv(out_path, samples);

  json meta = {{"model", fs::path(a.model).filename().string()},
               {"input", fs::path(a.input).filename().string()},
               {"particles", a.mjpf.n_particles},
               {"seed", a.mjpf.seed},
               {"norm", a.norm},
               {"threshold", threshold},
               {"steps", samples.size()}};
  const double med_ms = median(step_ms);
  if (a.timing) {
    double sum = 0.0;
    for (double v : step_ms) sum += v;
    meta["step_time_ms"] = {{"median", med_ms}, {"mean", sum / static_cast<double>(step_ms.size())}};
  }
  write_text(meta_path(out_path), meta.dump(2) + "\n");

  if (!a.svg.empty()) {
    std::vector<LabeledWindow> windows;
    if (!a.labels.empty()) windows = io::read_labels_csv(fs::path(a.labels));
    write_text(fs::path(a.svg), io::signal_svg(samples, threshold, windows));
  }

  const auto above = std::count_if(samples.begin(), samples.end(),
                                   [&](const AbnormalitySample& s) { return s.signal > threshold; });
  out << fmt::format("{} samples, {} above threshold {:.4f}; median step {:.3f} ms at {} particles\n",
                     samples.size(), above, threshold, med_ms, a.mjpf.n_particles);
  return kOk;
}

// --------------------------------------------------------------------------

struct EvalArgs {
  std::string signal;
  std::string labels;
  std::string out;
  double threshold = 0.0;
  std::size_t particles = 0;
  std::size_t min_run = 3;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--signal", a.signal, "signal CSV")->required();
  app.add_option("--labels", a.labels, "labels CSV")->required();
  app.add_option("--threshold", a.threshold, "event threshold (default: from the detect meta file)");
  app.add_option("--particles", a.particles, "particle count to report (default: from the meta file)");
  app.add_option("--min-run", a.min_run, "consecutive samples confirming an event")->capture_default_str();
  app.add_option("--out", a.out, "JSON report");
}

int run_eval(EvalArgs& a, const CLI::App& app, std::ostream& out) {
  const auto samples = io::read_signal_csv(fs::path(a.signal));
  const auto windows = io::read_labels_csv(fs::path(a.labels));
  if (samples.empty()) throw DataError(a.signal + ": no samples");
  const auto meta = read_json_if_exists(meta_path(fs::path(a.signal)));

  double threshold = 0.0;
  if (app.count("--threshold") > 0) {
    threshold = a.threshold;
  } else if (meta && meta->contains("threshold") && (*meta)["threshold"].is_number()) {
    threshold = (*meta)["threshold"].get<double>();
  } else {
    throw UsageError("no --threshold given and no detect meta file next to the signal");
  }
  if (!(threshold > 0.0)) throw UsageError("threshold must be positive");
  if (a.min_run < 1) throw UsageError("--min-run must be >= 1");

  std::optional<std::size_t> particles;
  if (app.count("--particles") > 0) {
    particles = a.particles;
  } else if (meta && meta->contains("particles")) {
    particles = (*meta)["particles"].get<std::size_t>();
  }

  const BinarySamples binary = samples_to_binary(samples, windows);
  double auc = std::numeric_limits<double>::quiet_NaN();
  const bool both = std::any_of(binary.labels.begin(), binary.labels.end(), [](int l) { return l == 1; }) &&
                    std::any_of(binary.labels.begin(), binary.labels.end(), [](int l) { return l == 0; });
  if (both) auc = roc_auc(binary.scores, binary.labels);
  const EventReport ev = event_detection(samples, windows, threshold, a.min_run);

  json report = {{"samples", samples.size()},
                 {"particles", particles ? json(*particles) : json(nullptr)},
                 {"threshold", threshold},
                 {"auc", number_or_null(auc)},
                 {"recall", number_or_null(ev.recall)},
                 {"precision", number_or_null(ev.precision)},
                 {"mean_latency_s", number_or_null(ev.mean_latency())},
                 {"abnormal_windows", ev.abnormal_windows},
                 {"detected_windows", ev.detected_windows},
                 {"true_events", ev.true_events},
                 {"false_events", ev.false_events}};
  json latencies = json::array();
  for (double l : ev.latencies) latencies.push_back(number_or_null(l));
  report["latencies_s"] = std::move(latencies);
  if (meta && meta->contains("step_time_ms")) report["step_time_ms"] = (*meta)["step_time_ms"];

  out << fmt::format("samples:          {}\n", samples.size());
  out << fmt::format("particles:        {}\n", particles ? std::to_string(*particles) : "unknown");
  out << fmt::format("threshold:        {:.4f}\n", threshold);
  out << fmt::format("auc:              {}\n", both ? fmt_or_na(auc) : "undefined (single-class labels)");
  out << fmt::format("recall:           {}\n", fmt_or_na(ev.recall));
  out << fmt::format("precision:        {}\n", fmt_or_na(ev.precision));
  out << fmt::format("events:           {} true, {} false\n", ev.true_events, ev.false_events);
  out << fmt::format("mean latency (s): {}\n", fmt_or_na(ev.mean_latency(), "{:.3f}"));
  if (report.contains("step_time_ms")) {
    out << fmt::format("step time (ms):   {:.4f} median\n", report["step_time_ms"]["median"].get<double>());
  } else {
    out << "step time (ms):   not recorded (run detect with --timing)\n";
  }
  if (!a.out.empty()) write_text(fs::path(a.out), report.dump(2) + "\n");
  return kOk;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Replaces `--config FILE` with the `--key=value` pairs the file holds. Keys
/// already given on the command line win over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::vector<std::pair<std::string, std::string>> from_file;
  std::size_t insert_at = std::string::npos;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    if (insert_at == std::string::npos) insert_at = out.size();
    std::ifstream f(path);
    if (!f) throw UsageError("cannot read config file '" + path + "'");
    std::string line;
    for (int n = 1; std::getline(f, line); ++n) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw UsageError(fmt::format("{}:{}: expected key = value", path, n));
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
        value = value.substr(1, value.size() - 2);
      }
      if (key.empty()) throw UsageError(fmt::format("{}:{}: empty key", path, n));
      from_file.emplace_back(std::move(key), std::move(value));
    }
  }
  if (insert_at == std::string::npos) return out;
  std::vector<std::string> injected;
  for (const auto& [key, value] : from_file) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(out.begin(), out.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) injected.push_back(flag + "=" + value);
  }
  out.insert(out.begin() + static_cast<long>(insert_at), injected.begin(), injected.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory self-awareness: learn switching models and detect abnormal motion", "trajsa"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "trajsa 0.1.0");

  SimulateArgs sim;
  LearnArgs learn;
  DetectArgs detect;
  EvalArgs eval;
  auto* c_sim = app.add_subcommand("simulate", "generate a scenario trajectory and its labels");
  add_simulate(*c_sim, sim);
  auto* c_learn = app.add_subcommand("learn", "learn a model bank from a normal trajectory");
  add_learn(*c_learn, learn);
  auto* c_detect = app.add_subcommand("detect", "run the particle filter and write the abnormality signal");
  add_detect(*c_detect, detect);
  auto* c_eval = app.add_subcommand("eval", "score a signal against labels");
  add_eval(*c_eval, eval);

  for (auto* sub : {c_sim, c_learn, c_detect, c_eval}) {
    sub->add_option("--config", "flat key=value file; keys are long option names");
  }

  try {
    const auto expanded = expand_config(args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "trajsa 0.1.0\n";
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << "run 'trajsa " << (sub ? sub->get_name() + " " : std::string()) << "--help' for usage\n";
    return kUsage;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim, out);
    if (c_learn->parsed()) return run_learn(learn, *c_learn, out, err);
    if (c_detect->parsed()) return run_detect(detect, *c_detect, out);
    if (c_eval->parsed()) return run_eval(eval, *c_eval, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace trajsa::cli
