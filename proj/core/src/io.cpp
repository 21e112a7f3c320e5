#include "trajsa/io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace trajsa::io {

using json = nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, std::size_t line, const char* column) {
  const std::string s = trim(field);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError(fmt::format("line {}: column '{}' is not a finite number: '{}'", line, column, s));
  }
  return v;
}

long parse_int(const std::string& field, std::size_t line, const char* column) {
  const std::string s = trim(field);
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(fmt::format("line {}: column '{}' is not an integer: '{}'", line, column, s));
  }
  return v;
}

/// Reads a CSV with the exact header `expected`; calls `row` for each data line.
template <typename RowFn>
void read_csv(std::istream& in, const std::vector<std::string>& expected, RowFn&& row) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!header) {
      for (auto& f : fields) f = trim(f);
      if (fields != expected) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        throw DataError(fmt::format("line {}: expected header '{}'", line_no, want));
      }
      header = true;
      continue;
    }
    if (fields.size() != expected.size()) {
      throw DataError(fmt::format("line {}: expected {} fields, got {}", line_no, expected.size(),
                                  fields.size()));
    }
    row(fields, line_no);
  }
  if (!header) throw DataError("empty CSV: missing header");
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::vector<Observation> read_trajectory_csv(std::istream& in) {
  std::vector<Observation> out;
  read_csv(in, {"t", "x", "y"}, [&](const std::vector<std::string>& f, std::size_t line) {
    Observation o;
    o.t = parse_double(f[0], line, "t");
    o.z = Vec2(parse_double(f[1], line, "x"), parse_double(f[2], line, "y"));
    if (!out.empty() && !(o.t > out.back().t)) {
      throw DataError(fmt::format("line {}: timestamps must strictly increase", line));
    }
    out.push_back(o);
  });
  return out;
}

std::vector<Observation> read_trajectory_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_trajectory_csv(in);
}

void write_trajectory_csv(std::ostream& out, const std::vector<Observation>& series) {
  out << "t,x,y\n";
  for (const auto& o : series) out << fmt::format("{},{},{}\n", o.t, o.z.x(), o.z.y());
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<Observation>& series) {
  auto out = open_out(path);
  write_trajectory_csv(out, series);
}

std::vector<LabeledWindow> read_labels_csv(std::istream& in) {
  std::vector<LabeledWindow> out;
  read_csv(in, {"start", "end", "label"}, [&](const std::vector<std::string>& f, std::size_t line) {
    LabeledWindow w;
    w.start = parse_double(f[0], line, "start");
    w.end = parse_double(f[1], line, "end");
    if (!(w.start < w.end)) throw DataError(fmt::format("line {}: window start must precede end", line));
    try {
      w.label = parse_window_label(trim(f[2]));
    } catch (const DataError& e) {
      throw DataError(fmt::format("line {}: {}", line, e.what()));
    }
    if (!out.empty() && w.start < out.back().end) {
      throw DataError(fmt::format("line {}: windows overlap or are out of order", line));
    }
    out.push_back(w);
  });
  return out;
}

std::vector<LabeledWindow> read_labels_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_labels_csv(in);
}

void write_labels_csv(std::ostream& out, const std::vector<LabeledWindow>& windows) {
  out << "start,end,label\n";
  for (const auto& w : windows) out << fmt::format("{},{},{}\n", w.start, w.end, to_string(w.label));
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<LabeledWindow>& windows) {
  auto out = open_out(path);
  write_labels_csv(out, windows);
}

std::vector<AbnormalitySample> read_signal_csv(std::istream& in) {
  std::vector<AbnormalitySample> out;
  read_csv(in, {"t", "signal", "model_id", "super_state_id", "is_dummy"},
           [&](const std::vector<std::string>& f, std::size_t line) {
             AbnormalitySample s;
             s.t = parse_double(f[0], line, "t");
             s.signal = parse_double(f[1], line, "signal");
             if (s.signal < 0.0) throw DataError(fmt::format("line {}: signal must be >= 0", line));
             s.model_id = static_cast<int>(parse_int(f[2], line, "model_id"));
             s.super_state_id = static_cast<int>(parse_int(f[3], line, "super_state_id"));
             const long dummy = parse_int(f[4], line, "is_dummy");
             if (dummy != 0 && dummy != 1) throw DataError(fmt::format("line {}: is_dummy must be 0 or 1", line));
             s.is_dummy = dummy == 1;
             if (s.is_dummy != (s.super_state_id == kDummySuperState)) {
               throw DataError(fmt::format("line {}: is_dummy disagrees with super_state_id", line));
             }
             out.push_back(s);
           });
  return out;
}

std::vector<AbnormalitySample> read_signal_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_signal_csv(in);
}

void write_signal_csv(std::ostream& out, const std::vector<AbnormalitySample>& samples) {
  out << "t,signal,model_id,super_state_id,is_dummy\n";
  for (const auto& s : samples) {
    out << fmt::format("{},{},{},{},{}\n", s.t, s.signal, s.model_id, s.super_state_id,
                       s.is_dummy ? 1 : 0);
  }
}

void write_signal_csv(const std::filesystem::path& path, const std::vector<AbnormalitySample>& samples) {
  auto out = open_out(path);
  write_signal_csv(out, samples);
}

// ---------------------------------------------------------------------------
// Model bank JSON

namespace {

template <typename Derived>
json matrix_json(const Eigen::MatrixBase<Derived>& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Derived>
json vector_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json som_json(const SomConfig& c) {
  return {{"rows", c.rows},   {"cols", c.cols},       {"epochs", c.epochs},
          {"lr0", c.lr0},     {"sigma0", c.sigma0},   {"alpha", c.weights.alpha},
          {"beta", c.weights.beta}, {"seed", c.seed}};
}

/// Reader that tracks the JSON path of every value it touches.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError((path_.empty() ? std::string("/") : path_) + ": " + what);
  }

  Reader at(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    const auto it = j_.find(key);
    if (it == j_.end()) Reader(j_, path_ + "/" + key).fail("missing field");
    return Reader(*it, path_ + "/" + key);
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  Reader at(std::size_t i) const { return Reader(j_.at(i), path_ + "/" + std::to_string(i)); }

  std::size_t array_size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }
  bool is_null() const { return j_.is_null(); }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  long integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<long>();
  }
  std::uint64_t unsigned_integer() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<long>() >= 0)) {
      fail("expected a nonnegative integer");
    }
    return j_.get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected a boolean");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  Eigen::VectorXd vector(Eigen::Index n) const {
    const std::size_t size = array_size();
    if (n >= 0 && size != static_cast<std::size_t>(n)) fail("expected " + std::to_string(n) + " numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(size));
    for (std::size_t i = 0; i < size; ++i) v(static_cast<Eigen::Index>(i)) = at(i).number();
    return v;
  }
  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) const {
    const std::size_t r = array_size();
    if (rows >= 0 && r != static_cast<std::size_t>(rows)) {
      fail("expected " + std::to_string(rows) + " rows");
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r), cols);
    for (std::size_t i = 0; i < r; ++i) m.row(static_cast<Eigen::Index>(i)) = at(i).vector(cols).transpose();
    return m;
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
};

SomConfig read_som(const Reader& r) {
  SomConfig c;
  c.rows = static_cast<int>(r.at("rows").integer());
  c.cols = static_cast<int>(r.at("cols").integer());
  c.epochs = static_cast<int>(r.at("epochs").integer());
  c.lr0 = r.at("lr0").number();
  c.sigma0 = r.at("sigma0").number();
  c.weights.alpha = r.at("alpha").number();
  c.weights.beta = r.at("beta").number();
  c.seed = r.at("seed").unsigned_integer();
  return c;
}

}  // namespace

std::string bank_to_json(const BankDocument& doc, int indent) {
  const ModelBank& bank = doc.bank;
  json models = json::array();
  for (const auto& m : bank.models) {
    json states = json::array();
    for (const auto& s : m.super_states) {
      states.push_back({{"id", s.id},
                        {"centroid", vector_json(s.centroid)},
                        {"control_u", vector_json(s.control_u)},
                        {"member_count", s.member_count},
                        {"spread", matrix_json(s.spread)}});
    }
    json matrices = json::array();
    json observed = json::array();
    for (std::size_t b = 0; b < m.trans.num_bins(); ++b) {
      matrices.push_back(matrix_json(m.trans.matrices[b]));
      observed.push_back(vector_json(m.trans.observed[b]));
    }
    models.push_back({{"id", m.id},
                      {"psi", m.psi},
                      {"alpha", m.weights.alpha},
                      {"beta", m.weights.beta},
                      {"super_states", std::move(states)},
                      {"transitions",
                       {{"dwell_edges", m.trans.dwell_edges},
                        {"matrices", std::move(matrices)},
                        {"observed", std::move(observed)}}}});
  }

  const FitConfig& fit = doc.config.fit;
  json config = {
      {"som", som_json(fit.learn.som)},
      {"dwell_edges", fit.learn.dwell_edges},
      {"smoothing", fit.learn.smoothing},
      {"min_states", fit.learn.min_states},
      {"psi_floor", fit.learn.psi_floor},
      {"samples_per_neuron", fit.learn.samples_per_neuron},
      {"velocity_half_window", fit.velocity_half_window},
      {"stop_on_stall", fit.stop_on_stall},
      {"gap_min", fit.gap_min},
      {"max_iterations", fit.max_iterations},
      {"per_segment_models", fit.per_segment_models},
      {"bootstrap_psi", fit.bootstrap_psi ? json(*fit.bootstrap_psi) : json(nullptr)},
      {"calibration_window", fit.calibration_window},
      {"calibration_seed", fit.calibration_seed},
      {"signal_calibration_particles", doc.config.calibration_particles},
      {"signal_calibration_seed", doc.config.calibration_seed},
  };

  json root = {
      {"format", "trajsa-model-bank"},
      {"version", kBankFormatVersion},
      {"noise",
       {{"q", matrix_json(bank.noise.q)},
        {"r", matrix_json(bank.noise.r)},
        {"dt_default", bank.noise.dt_default}}},
      {"signal_threshold", bank.signal_threshold},
      {"models", std::move(models)},
      {"config", std::move(config)},
      {"diagnostics",
       {{"converged", doc.diagnostics.converged},
        {"learning_iterations", doc.diagnostics.learning_iterations},
        {"abnormal_fraction", doc.diagnostics.abnormal_fraction},
        {"unexplained_fraction", doc.diagnostics.unexplained_fraction}}},
  };
  return root.dump(indent) + "\n";
}

BankDocument bank_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("/: invalid JSON: ") + e.what());
  }
  const Reader r(root, "");
  if (r.at("format").string() != "trajsa-model-bank") r.at("format").fail("unknown format");
  if (r.at("version").integer() != kBankFormatVersion) r.at("version").fail("unsupported version");

  BankDocument doc;
  ModelBank& bank = doc.bank;
  const Reader noise = r.at("noise");
  bank.noise.q = noise.at("q").matrix(4, 4);
  bank.noise.r = noise.at("r").matrix(2, 2);
  bank.noise.dt_default = noise.at("dt_default").number();
  bank.signal_threshold = r.at("signal_threshold").number();

  const Reader models = r.at("models");
  for (std::size_t i = 0; i < models.array_size(); ++i) {
    const Reader mr = models.at(i);
    SlModel m;
    m.id = static_cast<int>(mr.at("id").integer());
    m.psi = mr.at("psi").number();
    m.weights.alpha = mr.at("alpha").number();
    m.weights.beta = mr.at("beta").number();
    const Reader states = mr.at("super_states");
    for (std::size_t k = 0; k < states.array_size(); ++k) {
      const Reader sr = states.at(k);
      SuperState s;
      s.id = static_cast<int>(sr.at("id").integer());
      s.centroid = sr.at("centroid").vector(4);
      s.control_u = sr.at("control_u").vector(2);
      const long count = sr.at("member_count").integer();
      if (count < 1) sr.at("member_count").fail("expected a positive count");
      s.member_count = static_cast<std::size_t>(count);
      s.spread = sr.at("spread").matrix(4, 4);
      m.super_states.push_back(s);
    }
    const auto n = static_cast<Eigen::Index>(m.super_states.size());
    const Reader tr = mr.at("transitions");
    const Reader edges = tr.at("dwell_edges");
    for (std::size_t k = 0; k < edges.array_size(); ++k) {
      m.trans.dwell_edges.push_back(static_cast<int>(edges.at(k).integer()));
    }
    const Reader mats = tr.at("matrices");
    const Reader obs = tr.at("observed");
    if (mats.array_size() != m.trans.dwell_edges.size() + 1) {
      mats.fail("expected one matrix per dwell bin");
    }
    if (obs.array_size() != mats.array_size()) obs.fail("expected one count vector per dwell bin");
    for (std::size_t b = 0; b < mats.array_size(); ++b) {
      m.trans.matrices.push_back(mats.at(b).matrix(n, n));
      m.trans.observed.push_back(obs.at(b).vector(n));
    }
    try {
      m.validate();
    } catch (const InvalidArgument& e) {
      mr.fail(e.what());
    }
    bank.models.push_back(std::move(m));
  }
  try {
    bank.validate();
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }

  if (r.has("config")) {
    const Reader c = r.at("config");
    FitConfig& fit = doc.config.fit;
    fit.noise = bank.noise;
    fit.learn.som = read_som(c.at("som"));
    fit.learn.dwell_edges.clear();
    const Reader edges = c.at("dwell_edges");
    for (std::size_t k = 0; k < edges.array_size(); ++k) {
      fit.learn.dwell_edges.push_back(static_cast<int>(edges.at(k).integer()));
    }
    fit.learn.smoothing = c.at("smoothing").number();
    fit.learn.min_states = static_cast<std::size_t>(c.at("min_states").unsigned_integer());
    fit.learn.psi_floor = c.at("psi_floor").number();
    fit.learn.samples_per_neuron = c.at("samples_per_neuron").number();
    fit.velocity_half_window = static_cast<int>(c.at("velocity_half_window").integer());
    fit.stop_on_stall = c.at("stop_on_stall").boolean();
    fit.gap_min = static_cast<int>(c.at("gap_min").integer());
    fit.max_iterations = static_cast<int>(c.at("max_iterations").integer());
    fit.per_segment_models = c.at("per_segment_models").boolean();
    const Reader psi0 = c.at("bootstrap_psi");
    if (!psi0.is_null()) fit.bootstrap_psi = psi0.number();
    fit.calibration_window = static_cast<int>(c.at("calibration_window").integer());
    fit.calibration_seed = c.at("calibration_seed").unsigned_integer();
    doc.config.calibration_particles =
        static_cast<std::size_t>(c.at("signal_calibration_particles").unsigned_integer());
    doc.config.calibration_seed = c.at("signal_calibration_seed").unsigned_integer();
  }
  if (r.has("diagnostics")) {
    const Reader d = r.at("diagnostics");
    doc.diagnostics.converged = d.at("converged").boolean();
    doc.diagnostics.learning_iterations = static_cast<int>(d.at("learning_iterations").integer());
    const Reader fr = d.at("abnormal_fraction");
    for (std::size_t k = 0; k < fr.array_size(); ++k) doc.diagnostics.abnormal_fraction.push_back(fr.at(k).number());
    doc.diagnostics.unexplained_fraction = d.at("unexplained_fraction").number();
  }
  return doc;
}

void save_bank(const std::filesystem::path& path, const BankDocument& doc) {
  auto out = open_out(path);
  out << bank_to_json(doc);
}

BankDocument load_bank(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return bank_from_json(ss.str());
}

bool banks_equal(const ModelBank& a, const ModelBank& b) {
  if (a.noise.q != b.noise.q || a.noise.r != b.noise.r || a.noise.dt_default != b.noise.dt_default ||
      a.signal_threshold != b.signal_threshold || a.models.size() != b.models.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    const SlModel& x = a.models[i];
    const SlModel& y = b.models[i];
    if (x.id != y.id || x.psi != y.psi || x.weights.alpha != y.weights.alpha ||
        x.weights.beta != y.weights.beta || x.super_states.size() != y.super_states.size() ||
        x.trans.dwell_edges != y.trans.dwell_edges || x.trans.num_bins() != y.trans.num_bins()) {
      return false;
    }
    for (std::size_t k = 0; k < x.super_states.size(); ++k) {
      const SuperState& s = x.super_states[k];
      const SuperState& t = y.super_states[k];
      if (s.id != t.id || s.centroid != t.centroid || s.control_u != t.control_u ||
          s.member_count != t.member_count || s.spread != t.spread) {
        return false;
      }
    }
    for (std::size_t bin = 0; bin < x.trans.num_bins(); ++bin) {
      if (x.trans.matrices[bin] != y.trans.matrices[bin] || x.trans.observed[bin] != y.trans.observed[bin]) {
        return false;
      }
    }
  }
  return true;
}

std::string signal_svg(const std::vector<AbnormalitySample>& samples, double threshold,
                       const std::vector<LabeledWindow>& windows) {
  constexpr double kW = 1000.0, kH = 300.0, kPad = 30.0;
  double t0 = samples.empty() ? 0.0 : samples.front().t;
  double t1 = samples.empty() ? 1.0 : samples.back().t;
  if (!(t1 > t0)) t1 = t0 + 1.0;
  double ymax = threshold;
  for (const auto& s : samples) ymax = std::max(ymax, s.signal);
  ymax = ymax > 0.0 ? ymax * 1.05 : 1.0;
  auto sx = [&](double t) { return kPad + (t - t0) / (t1 - t0) * (kW - 2 * kPad); };
  auto sy = [&](double y) { return kH - kPad - y / ymax * (kH - 2 * kPad); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kW, kH, kW, kH);
  for (const auto& w : windows) {
    if (w.label != WindowLabel::Abnormal) continue;
    const double a = sx(std::clamp(w.start, t0, t1)), b = sx(std::clamp(w.end, t0, t1));
    svg += fmt::format("<rect x=\"{:.2f}\" y=\"{}\" width=\"{:.2f}\" height=\"{}\" fill=\"#f4c7c3\"/>\n", a,
                       kPad, std::max(0.0, b - a), kH - 2 * kPad);
  }
  svg += "<polyline fill=\"none\" stroke=\"#1f4e99\" stroke-width=\"1\" points=\"";
  for (const auto& s : samples) svg += fmt::format("{:.2f},{:.2f} ", sx(s.t), sy(s.signal));
  svg += "\"/>\n";
  if (threshold > 0.0) {
    svg += fmt::format(
        "<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\"/>\n",
        kPad, sy(threshold), kW - kPad, sy(threshold));
  }
  svg += fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
      "<text x=\"{0}\" y=\"{3}\" font-size=\"12\">t = {4:.1f} s</text>\n"
      "<text x=\"{5}\" y=\"{3}\" font-size=\"12\" text-anchor=\"end\">t = {6:.1f} s</text>\n"
      "<text x=\"{0}\" y=\"20\" font-size=\"12\">max = {7:.3g}</text>\n</svg>\n",
      kPad, kH - kPad, kW - kPad, kH - 8, t0, kW - kPad, t1, ymax / 1.05);
  return svg;
}

}  // namespace trajsa::io
