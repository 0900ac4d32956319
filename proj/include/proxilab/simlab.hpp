#pragma once

#include "proxilab/atl.hpp"
#include "proxilab/network.hpp"
#include "proxilab/socnav.hpp"
#include "proxilab/stats/hypothesis.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace proxilab::simlab {

/// Parametric stand-in for a study participant.
struct SyntheticUser {
  double base_distance = 1.0;       // meters
  double angular_amplitude = 0.0;   // meters
  double angular_phase = 0.0;       // radians
  double noise_sigma = 0.0;         // meters
  double ar_physical_offset = 0.0;  // physical minus virtual preference, meters
  double approach_length = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Noise-free preference d*(angle) = base + amplitude * cos(angle - phase), clipped.
double preferred_mean(const SyntheticUser& user, double angle);

/// One noisy stop distance. Deterministic in (user.seed, draw).
double preferred_distance(const SyntheticUser& user, double angle, std::uint64_t draw = 0);

/// 100 * logistic(kappa * (d*(bearing) - hr_dist)).
double ground_truth_discomfort(const SyntheticUser& user, const FeatureVector& f, double kappa = 4.0);

enum class Preset { flat, angled, shifted };

const char* to_string(Preset p);
Preset preset_from_string(const std::string& s);

/// Draws one user of the preset family from `seed`.
SyntheticUser sample_user(Preset preset, std::uint64_t seed);

struct Environment {
  RoomPolygon room;
  Pose2D user;
};

/// Rectangular room with the user placed at least 0.8 m from every wall.
Environment sample_environment(std::uint64_t seed);

/// `n` user seeds derived from one experiment seed.
std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, int n);

/// Synthetic scenes in the SocNav1 record layout. Most carry a single,
/// non-interacting human. Ratings combine a soft distance ramp with wall
/// proximity, relative facing and room size, plus rater noise.
std::vector<SocNavScenario> make_socnav_fixture(int count, std::uint64_t seed);

struct Study1Config {
  Preset preset = Preset::angled;
  int rounds = 3;
  int angles_per_round = 3;
  int validation_approaches = 9;
  int test_approaches = 9;
  double kappa = 4.0;
  bool smooth = true;
  FineTuneConfig fine_tune{};
  atl::DiscriminatorConfig discriminator{};
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct UserResult {
  std::uint64_t seed = 0;
  SyntheticUser user;
  double mae_atl = 0.0;
  double mae_rs = 0.0;
  double mae_base = 0.0;
  std::size_t train_size = 0;  // labeled points per arm
  std::size_t rs_train_size = 0;
  std::vector<double> atl_angles;
  std::vector<double> rs_angles;
  double atl_angle_std = 0.0;
  double rs_angle_std = 0.0;
  double ks = 0.0;
};

struct Comparison {
  std::string a;
  std::string b;
  double mean_a = 0.0, std_a = 0.0;
  double mean_b = 0.0, std_b = 0.0;
  stats::TestResult test;
};

struct ExperimentReport {
  Study1Config config;
  std::vector<UserResult> users;
  double mean_atl = 0.0, std_atl = 0.0;
  double mean_rs = 0.0, std_rs = 0.0;
  double mean_base = 0.0, std_base = 0.0;
  /// Mean over users and both arms of 1 - mae_ft / mae_base.
  double mean_relative_reduction = 0.0;
  std::vector<Comparison> test_matrix;  // RS-ATL, RS-notFT, ATL-notFT, ATL-RS
  stats::TestResult angle_std_spearman;  // both arms pooled
  stats::TestResult ks_spearman;         // ATL arm
};

/// One synthetic participant through both sampling arms.
UserResult run_user(const ProxemicsNetwork& base, const atl::SamplerGrid& grid, const Study1Config& cfg,
                    std::uint64_t seed);

ExperimentReport run_study1(const ProxemicsNetwork& base, int n_users, const atl::SamplerGrid& grid,
                            const Study1Config& cfg, std::span<const std::uint64_t> seeds);

std::string report_to_json(const ExperimentReport& report);

struct ReplicaConfig {
  Preset preset = Preset::shifted;
  int repeats = 3;               // stops per angle per condition
  int planted_outliers = 1;      // per user and condition
  double outlier_distance = 5.0; // meters
  double holdout_fraction = 0.25;
  double bandwidth = 1.0;
  double gpr_noise = 1e-2;
  int grid_points = 801;
  std::uint64_t forest_seed = 0;

  void validate() const;
};

struct ReplicaUser {
  std::uint64_t seed = 0;
  SyntheticUser user;
  bool held_out = false;
  std::vector<double> angles;
  std::vector<double> virtual_modes;
  std::vector<double> physical_modes;
  std::vector<double> predicted_physical;  // held-out users only
  std::size_t planted = 0;
  std::size_t planted_removed = 0;
  std::size_t removed_total = 0;
  double abs_mean_diff_raw = 0.0;      // |mean virtual - mean physical| before removal
  double abs_mean_diff_cleaned = 0.0;  // after removal
  double gpr_error = 0.0;    // mean |predicted - physical mode|, held-out only
  double naive_error = 0.0;  // mean |virtual mode - physical mode|, held-out only
};

struct ReplicaReport {
  ReplicaConfig config;
  std::vector<ReplicaUser> users;
  double outlier_recall = 0.0;
  double mean_abs_diff_raw = 0.0;
  double mean_abs_diff_cleaned = 0.0;
  double heldout_gpr_error = 0.0;
  double heldout_naive_error = 0.0;
  /// Least-squares slope and intercept of the GPR mean over the training input range.
  double fit_slope = 0.0;
  double fit_intercept = 0.0;
  double train_rmse = 0.0;
};

ReplicaReport run_ar_physical_replica(int n_users, const ReplicaConfig& cfg, std::span<const std::uint64_t> seeds);

std::string replica_to_json(const ReplicaReport& report);

}  // namespace proxilab::simlab
