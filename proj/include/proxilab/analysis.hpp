#pragma once

#include "proxilab/simlab.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace proxilab::analysis {

/// Stops and fine-tune results pulled out of one session event log.
struct SessionStops {
  std::string session_id;
  std::string participant;
  std::string condition;
  std::string strategy;
  std::vector<double> angles;
  std::vector<double> distances;
  std::optional<double> pre_mae;   // latest finetuned event
  std::optional<double> post_mae;
};

SessionStops summarize_session_log(const std::string& jsonl);
/// Every session-*.jsonl in `dir`, sorted by file name.
std::vector<SessionStops> load_session_dir(const std::filesystem::path& dir);

struct AnalysisConfig {
  double bandwidth = 1.0;
  int grid_points = 801;
  double grid_max = 4.0;  // meters
  double gpr_noise = 1e-2;
  double holdout_fraction = 0.25;
  std::uint64_t forest_seed = 0;
  std::string physical_condition = "physical";

  void validate() const;
};

/// One participant under one condition, all strategies pooled.
struct GroupAnalysis {
  std::string participant;
  std::string condition;
  std::vector<double> angles;
  std::vector<double> distances;
  std::vector<double> scores;
  std::vector<bool> inlier;
  std::vector<double> mode_angles;
  std::vector<double> modes;  // KDE mode of the inlier stops per angle
  double mean_raw = 0.0;
  double mean_cleaned = 0.0;
};

struct ModePair {
  std::string participant;
  double angle = 0.0;
  double virtual_mode = 0.0;
  double physical_mode = 0.0;
  bool held_out = false;
  std::optional<double> predicted;
};

struct GprSummary {
  std::vector<ModePair> pairs;
  double train_rmse = 0.0;
  double heldout_gpr_error = 0.0;
  double heldout_naive_error = 0.0;
};

struct AnalysisReport {
  AnalysisConfig config;
  std::vector<SessionStops> sessions;
  std::vector<GroupAnalysis> groups;
  /// Per participant with both conditions: |mean virtual - mean physical|.
  std::vector<std::pair<std::string, std::pair<double, double>>> abs_mean_diffs;  // raw, cleaned
  std::optional<GprSummary> gpr;
  std::string gpr_note;
  std::vector<simlab::Comparison> test_matrix;
  std::string test_matrix_note;
};

AnalysisReport analyze_sessions(std::vector<SessionStops> sessions, const AnalysisConfig& cfg = {});
std::string analysis_to_json(const AnalysisReport& report);

}  // namespace proxilab::analysis
