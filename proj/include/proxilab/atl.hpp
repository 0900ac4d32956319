#pragma once

#include "proxilab/geometry.hpp"
#include "proxilab/network.hpp"
#include "proxilab/socnav.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace proxilab::atl {

struct SamplerGrid {
  std::vector<double> angles;     // radians, in the user's frame
  std::vector<double> distances;  // meters, ascending
  double approach_length = 2.0;

  /// Nine angles over [-90, 90] degrees, distances 0.3..2.0 m every 0.1 m.
  static SamplerGrid defaults();
  void validate() const;
};

enum class DomainLabel { application, training };

struct CandidateScenario {
  FeatureVector features;
  double angle = 0.0;
  double distance = 0.0;
  Point2 robot_position = Point2::Zero();
  std::optional<DomainLabel> domain_label;
  std::optional<double> predicted_app_confidence;
  /// Set once an approach along this angle has passed through it (d >= stop).
  bool labeled = false;
};

struct CandidatePool {
  RoomPolygon room;
  Pose2D user;
  SamplerGrid grid;
  std::vector<CandidateScenario> candidates;
  std::size_t dropped = 0;
};

/// Robot pose at `distance` along `angle` (user frame), heading at the user.
Pose2D robot_pose_on_approach(const Pose2D& user, double angle, double distance);

/// One candidate per (angle, distance) pair that lands inside the room.
CandidatePool generate_pool(const RoomPolygon& room, const Pose2D& user, const SamplerGrid& grid);

enum class DiscriminatorArch { logistic, mlp };

struct DiscriminatorConfig {
  DiscriminatorArch arch = DiscriminatorArch::logistic;
  int max_iterations = 2000;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  double tolerance = 1e-7;
  int mlp_epochs = 60;
};

/// Binary domain classifier: P(application | features).
class DiscriminatorModel {
 public:
  double predict(const FeatureVector& f) const;
  double predict(const FeatureArray& raw) const;

  DiscriminatorArch arch = DiscriminatorArch::logistic;
  FeatureNormalizer normalizer;
  FeatureArray weights = FeatureArray::Zero();
  double bias = 0.0;
  std::optional<ProxemicsNetwork> mlp;
  int iterations = 0;
  double final_loss = 0.0;
  std::size_t n_application = 0;
  std::size_t n_training = 0;

  bool operator==(const DiscriminatorModel& o) const;
};

/// Inverse-frequency weighted training; application = positive class.
DiscriminatorModel train_discriminator(std::span<const FeatureArray> application, std::span<const FeatureArray> training,
                                       std::uint64_t seed, const DiscriminatorConfig& cfg = {});
DiscriminatorModel train_discriminator(std::span<const CandidateScenario> app_pool,
                                       std::span<const LabeledExample> training_sample, std::uint64_t seed,
                                       const DiscriminatorConfig& cfg = {});

double discriminator_accuracy(const DiscriminatorModel& model, std::span<const FeatureArray> application,
                              std::span<const FeatureArray> training);

using CandidateScorer = std::function<double(const CandidateScenario&)>;

struct AngleSelection {
  std::vector<double> angles;
  std::vector<double> confidences;
  std::vector<Point2> start_positions;
  std::vector<double> approach_lengths;
  std::vector<std::string> adjustments;
};

/// Groups the unlabeled candidates by angle, averages the scorer's
/// application confidence, and returns the top-k angles (ties broken by
/// ascending angle).
AngleSelection select_angles(const CandidateScorer& scorer, const CandidatePool& pool, int k);
AngleSelection select_angles(const DiscriminatorModel& model, const CandidatePool& pool, int k);

/// Start point along `angle`, shortened in 5 cm steps until inside the room.
Point2 approach_start(const RoomPolygon& room, const Pose2D& user, double angle, double approach_length,
                      double* used_length = nullptr);

struct StopLabelConfig {
  std::vector<double> distances = SamplerGrid::defaults().distances;
  double approach_length = 2.0;
  double kappa = 4.0;  // per meter
};

/// 100 * logistic(kappa * (stop - d)).
double discomfort_ramp(double distance, double stop_distance, double kappa);

/// Converts one stop event into labels at every grid distance on the
/// approach line that lies inside the room.
std::vector<LabeledExample> stop_to_labels(double angle, double stop_distance, const RoomPolygon& room,
                                           const Pose2D& user, const StopLabelConfig& cfg);

enum class Strategy { atl, random };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct ApproachOutcome {
  int round = 0;
  double angle = 0.0;
  double stop_distance = 0.0;
};

struct SamplerConfig {
  int angles_per_round = 3;
  StopLabelConfig labels{};
  DiscriminatorConfig discriminator{};
};

struct SamplerState {
  Strategy strategy = Strategy::atl;
  CandidatePool pool;
  std::vector<FeatureArray> training_domain;
  SamplerConfig cfg;
  std::uint64_t seed = 0;
  std::mt19937_64 rng;
  std::optional<DiscriminatorModel> discriminator;
  std::vector<LabeledExample> labeled;
  std::vector<ApproachOutcome> approaches;
  std::vector<std::vector<double>> selections;
  int round = 0;
  int retrain_count = 0;
};

SamplerState init_sampler(CandidatePool pool, std::vector<FeatureArray> training_domain, Strategy strategy,
                          std::uint64_t seed, const SamplerConfig& cfg = {});

/// Angles for the next round: top-k by discriminator confidence (ATL) or k
/// uniform draws with replacement (random). Advances the round counter.
std::vector<double> plan_round(SamplerState& state);

/// Appends the labels of one stop event and marks the pool candidates the
/// robot passed through on that approach as labeled.
void record_stop(SamplerState& state, double angle, double stop_distance);

/// Retrains the discriminator with labeled points added to the application class.
void retrain(SamplerState& state);

using LabelProvider = std::function<double(double angle, const Point2& start, int round)>;

/// plan_round, query the provider per angle, record the stops, retrain (ATL).
void run_round(SamplerState& state, const LabelProvider& provider);

}  // namespace proxilab::atl
