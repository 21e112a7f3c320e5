#pragma once

#include "trajsa/learner.hpp"
#include "trajsa/model.hpp"

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace trajsa::io {

inline constexpr int kBankFormatVersion = 1;

// CSV formats (UTF-8, LF newlines, header row):
//   trajectory  t,x,y
//   labels      start,end,label
//   signal      t,signal,model_id,super_state_id,is_dummy
// Doubles are written in shortest round-trip form.

std::vector<Observation> read_trajectory_csv(std::istream& in);
std::vector<Observation> read_trajectory_csv(const std::filesystem::path& path);
void write_trajectory_csv(std::ostream& out, const std::vector<Observation>& series);
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<Observation>& series);

std::vector<LabeledWindow> read_labels_csv(std::istream& in);
std::vector<LabeledWindow> read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(std::ostream& out, const std::vector<LabeledWindow>& windows);
void write_labels_csv(const std::filesystem::path& path, const std::vector<LabeledWindow>& windows);

std::vector<AbnormalitySample> read_signal_csv(std::istream& in);
std::vector<AbnormalitySample> read_signal_csv(const std::filesystem::path& path);
void write_signal_csv(std::ostream& out, const std::vector<AbnormalitySample>& samples);
void write_signal_csv(const std::filesystem::path& path, const std::vector<AbnormalitySample>& samples);

/// Learning settings echoed into the bank file.
struct LearnEcho {
  FitConfig fit;
  std::size_t calibration_particles = 50;
  std::uint64_t calibration_seed = 1;
};

struct FitDiagnostics {
  bool converged = true;
  int learning_iterations = 0;
  std::vector<double> abnormal_fraction;
  double unexplained_fraction = 0.0;
};

/// Everything stored in a model-bank JSON file.
struct BankDocument {
  ModelBank bank;
  LearnEcho config;
  FitDiagnostics diagnostics;
};

std::string bank_to_json(const BankDocument& doc, int indent = 2);
/// Parses and validates a bank document. Errors name the offending JSON path,
/// e.g. "/models/1/super_states/0/centroid: expected 4 numbers".
BankDocument bank_from_json(const std::string& text);

void save_bank(const std::filesystem::path& path, const BankDocument& doc);
BankDocument load_bank(const std::filesystem::path& path);

/// Field-for-field equality of two banks (exact on every double).
bool banks_equal(const ModelBank& a, const ModelBank& b);

/// Minimal SVG line plot of the signal over time with an optional threshold line.
std::string signal_svg(const std::vector<AbnormalitySample>& samples, double threshold,
                       const std::vector<LabeledWindow>& windows = {});

}  // namespace trajsa::io
