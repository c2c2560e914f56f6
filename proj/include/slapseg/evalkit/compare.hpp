#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slapseg/evalkit/matching.hpp"
#include "slapseg/evalkit/roc.hpp"
#include "slapseg/evalkit/segmenters.hpp"
#include "slapseg/evalkit/side_errors.hpp"
#include "slapseg/synthgen/splits.hpp"

namespace slapseg::eval {

struct CompareConfig {
  std::uint64_t seed = 0;
  int impostors_per_print = kImpostorsPerPrint;
  double histogram_bin = 8.0;
  bool matching = true;
};

/// A slap the segmenter did not handle cleanly.
struct SlapFailure {
  std::string slap_id;
  std::string reason;
};

/// Results for one (model, cohort) cell.
struct CellReport {
  std::string model;
  synth::Cohort cohort = synth::Cohort::kAdult;
  std::size_t slaps = 0;
  std::size_t fingers = 0;
  std::size_t unmatched_truth = 0;
  std::size_t unmatched_detected = 0;
  /// Errors of matched fingers, in slap then finger order; ids alongside.
  std::vector<SideError> errors;
  std::vector<std::string> finger_ids;
  std::vector<SlapFailure> failures;
  std::optional<MaeReport> mae;
  ToleranceSummary tolerance;
  Histogram bottom_histogram;
  std::vector<MatchTrial> trials;
  std::optional<RocReport> roc;
};

struct CompareReport {
  std::vector<CellReport> cells;  // segmenter order, adult before juvenile

  const CellReport& cell(const std::string& model, synth::Cohort cohort) const;
};

/// Runs every segmenter on the given slaps. Detected boxes are mapped into
/// the annotation frame and paired with the truth by greedy IoU matching.
/// Segmenter exceptions and box-count mismatches become per-slap failures.
CompareReport compare_models(const synth::DatasetManifest& manifest, const std::vector<std::string>& slap_ids,
                             std::span<const Segmenter> segmenters, const CompareConfig& cfg);
/// Same on the test partition of a split.
CompareReport compare_models(const synth::DatasetManifest& manifest, const synth::SplitAssignment& split,
                             std::span<const Segmenter> segmenters, const CompareConfig& cfg);

/// Files are named <model>_<cohort>_<artifact>.csv (mae, bottom_hist, roc,
/// errors) next to mae_table.csv, tpr_table.csv and report.json.
void write_report(const CompareReport& report, const std::filesystem::path& dir);
std::string report_json(const CompareReport& report);
/// model,cohort,side,mean_abs,std_abs,count
std::string mae_table_csv(const CompareReport& report);
/// model,cohort,genuine,impostor,tpr_at_0.001,tpr_at_0.01,tpr_at_0.1
std::string tpr_table_csv(const CompareReport& report);

/// Model names become file-name safe: anything outside [A-Za-z0-9._-] is '_'.
std::string file_safe(const std::string& name);

}  // namespace slapseg::eval
