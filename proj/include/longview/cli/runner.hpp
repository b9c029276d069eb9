#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "longview/cli/config.hpp"
#include "longview/scaling/fit.hpp"

namespace longview::cli {

// The bundled transcription of the published per-run data points.
inline constexpr uint64_t kFixtureChecksum = 0xE0DCFE7E28185C09ULL;
// Published Table 2 point estimates (years) for the episode-classification
// OOD rows; the inputs to the threshold back-derivation.
inline constexpr double kTable2PracticeYears = 32.9e6;
inline constexpr double kTable2Practice2pctYears = 37.8e6;

std::string default_fixture_path();

struct ResultRow {
  std::string condition;
  std::string algorithm;
  std::string protocol;
  double hours = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  std::string run_id;
  uint64_t seed = 0;
};

std::string results_csv_header();
std::string to_csv_line(const ResultRow& row);
std::vector<ResultRow> read_results_csv(const std::string& path);

// Points grouped by condition, in order of first appearance. Accepts both the
// fixture schema (accuracy column) and the results schema (accuracy_top1 /
// accuracy_top5; pick with `metric` = "top1" or "top5").
using ConditionPoints = std::vector<std::pair<std::string, std::vector<scaling::ScalingPoint>>>;
ConditionPoints load_points_csv(const std::string& path, const std::string& metric = "top5");

// Trains and evaluates the full (fraction x repeat) grid, appending one row
// per protocol per run. Completed runs are skipped on rerun (manifest hash
// match); a manifest with a different config hash is refused. Writes
// <output_dir>/results.csv and returns its rows.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);

struct ReproRow {
  std::string condition;
  scaling::LinearFit fit;
  scaling::Extrapolation ex;
};

struct ReproReport {
  std::vector<ReproRow> table1;  // threshold 90 (top-5)
  double theta_first = 0.0;
  double theta_second = 0.0;
  double theta = 0.0;            // derived human-level OOD threshold
  std::vector<ReproRow> table2;  // threshold = derived theta
};

ReproReport repro_paper(const std::string& fixture_path = default_fixture_path());
std::string repro_report_json(const ReproReport& report);
std::string repro_report_text(const ReproReport& report);

// One SVG per condition with >= 3 points. Returns the written paths; prints a
// notice for skipped conditions.
std::vector<std::string> emit_report(const ConditionPoints& conditions, const std::string& out_dir,
                                     double threshold, double ood_threshold);

}  // namespace longview::cli
