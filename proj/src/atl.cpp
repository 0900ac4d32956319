#include "proxilab/atl.hpp"

#include "proxilab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace proxilab::atl {

SamplerGrid SamplerGrid::defaults() {
  SamplerGrid g;
  for (int i = 0; i < 9; ++i) g.angles.push_back(-std::numbers::pi / 2 + i * std::numbers::pi / 8);
  for (int i = 3; i <= 20; ++i) g.distances.push_back(i / 10.0);
  g.approach_length = 2.0;
  return g;
}

void SamplerGrid::validate() const {
  if (angles.empty() || distances.empty()) throw std::invalid_argument("sampler grid is empty");
  for (double a : angles) {
    if (!(a > -std::numbers::pi && a <= std::numbers::pi)) throw std::invalid_argument("grid angle outside (-pi, pi]");
  }
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (!(distances[i] > 0.0)) throw std::invalid_argument("grid distances must be positive");
    if (i > 0 && !(distances[i] > distances[i - 1])) throw std::invalid_argument("grid distances must ascend");
  }
  if (!(approach_length > 0.0)) throw std::invalid_argument("approach_length must be positive");
}

Pose2D robot_pose_on_approach(const Pose2D& user, double angle, double distance) {
  const double world = user.heading + angle;
  return {user.x + distance * std::cos(world), user.y + distance * std::sin(world), world + std::numbers::pi};
}

CandidatePool generate_pool(const RoomPolygon& room, const Pose2D& user, const SamplerGrid& grid) {
  grid.validate();
  if (!room.contains(user.position())) throw OutsideRoom("user is not inside the room");
  CandidatePool pool{room, user, grid, {}, 0};
  for (double angle : grid.angles) {
    for (double d : grid.distances) {
      const Pose2D robot = robot_pose_on_approach(user, angle, d);
      if (!room.contains(robot.position())) {
        ++pool.dropped;
        continue;
      }
      CandidateScenario c;
      c.features = extract_features(room, user, robot);
      c.angle = angle;
      c.distance = d;
      c.robot_position = robot.position();
      c.domain_label = DomainLabel::application;
      pool.candidates.push_back(std::move(c));
    }
  }
  return pool;
}

double DiscriminatorModel::predict(const FeatureVector& f) const { return predict(f.to_array()); }

double DiscriminatorModel::predict(const FeatureArray& raw) const {
  if (arch == DiscriminatorArch::mlp && mlp) return mlp->forward(FeatureVector::from_array(raw))(1);
  const double z = weights.dot(normalizer.apply(raw)) + bias;
  return 1.0 / (1.0 + std::exp(-z));
}

bool DiscriminatorModel::operator==(const DiscriminatorModel& o) const {
  if (arch != o.arch || !(normalizer == o.normalizer) || weights != o.weights || bias != o.bias) return false;
  if (mlp.has_value() != o.mlp.has_value()) return false;
  return !mlp || mlp->same_parameters(*o.mlp);
}

namespace {

DiscriminatorModel train_logistic(const FeatureNormalizer& norm, std::span<const FeatureArray> app,
                                  std::span<const FeatureArray> trn, std::uint64_t seed, const DiscriminatorConfig& cfg) {
  const Eigen::Index n = static_cast<Eigen::Index>(app.size() + trn.size());
  Eigen::MatrixXd x(kFeatureCount, n);
  Eigen::VectorXd y(n), w(n);
  const double w_app = static_cast<double>(n) / (2.0 * static_cast<double>(app.size()));
  const double w_trn = static_cast<double>(n) / (2.0 * static_cast<double>(trn.size()));
  Eigen::Index col = 0;
  for (const auto& r : app) {
    x.col(col) = norm.apply(r);
    y(col) = 1.0;
    w(col++) = w_app;
  }
  for (const auto& r : trn) {
    x.col(col) = norm.apply(r);
    y(col) = 0.0;
    w(col++) = w_trn;
  }

  DiscriminatorModel m;
  m.arch = DiscriminatorArch::logistic;
  m.normalizer = norm;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> init(0.0, 0.01);
  for (int i = 0; i < kFeatureCount; ++i) m.weights(i) = init(rng);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 1; it <= cfg.max_iterations; ++it) {
    const Eigen::VectorXd z = (x.transpose() * m.weights).array() + m.bias;
    const Eigen::VectorXd p = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    const Eigen::VectorXd r = (w.array() * (p - y).array()).matrix() * inv_n;
    const FeatureArray gw = x * r + cfg.l2 * m.weights;
    const double gb = r.sum();
    m.weights -= cfg.learning_rate * gw;
    m.bias -= cfg.learning_rate * gb;
    m.iterations = it;
    if (std::sqrt(gw.squaredNorm() + gb * gb) < cfg.tolerance) break;
  }
  const Eigen::VectorXd z = (x.transpose() * m.weights).array() + m.bias;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // log(1 + e^-z) for positives, log(1 + e^z) for negatives
    const double s = y(i) > 0.5 ? -z(i) : z(i);
    loss += w(i) * (std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))));
  }
  m.final_loss = loss * inv_n + 0.5 * cfg.l2 * m.weights.squaredNorm();
  return m;
}

DiscriminatorModel train_mlp(const FeatureNormalizer& norm, std::span<const FeatureArray> app,
                             std::span<const FeatureArray> trn, std::uint64_t seed, const DiscriminatorConfig& cfg) {
  // Class balance by cycling the minority class up to the majority count.
  std::vector<LabeledExample> data;
  const std::size_t target = std::max(app.size(), trn.size());
  for (std::size_t i = 0; i < target; ++i) {
    data.push_back({FeatureVector::from_array(app[i % app.size()]), 100.0, ExampleSource::synthetic});
    data.push_back({FeatureVector::from_array(trn[i % trn.size()]), 0.0, ExampleSource::synthetic});
  }
  const NetworkConfig net_cfg{};
  // Two classes at scores 0 and 100; a tiny distance scale makes the soft
  // labels effectively one-hot.
  const SordConfig binary{2, 1.0};
  const SmoothingConfig smooth{1, 0};
  ProxemicsNetwork net = ProxemicsNetwork::initialize(net_cfg, binary, smooth, norm, seed);
  TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.momentum = 0.9;
  tc.weight_decay = 1e-4;
  tc.epochs = cfg.mlp_epochs;
  tc.seed = seed;
  DatasetSplit split;
  split.train = std::move(data);
  ProxemicsNetwork trained = proxilab::train(split, net_cfg, tc, binary, smooth);
  DiscriminatorModel m;
  m.arch = DiscriminatorArch::mlp;
  m.normalizer = trained.normalizer();
  m.iterations = tc.epochs;
  m.final_loss = trained.meta.train_loss.empty() ? 0.0 : trained.meta.train_loss.back();
  trained.meta.domain_sample.clear();
  m.mlp = std::move(trained);
  return m;
}

}  // namespace

DiscriminatorModel train_discriminator(std::span<const FeatureArray> application, std::span<const FeatureArray> training,
                                       std::uint64_t seed, const DiscriminatorConfig& cfg) {
  if (application.empty() || training.empty()) {
    throw std::invalid_argument("train_discriminator: both domains need at least one example");
  }
  std::vector<FeatureArray> all(application.begin(), application.end());
  all.insert(all.end(), training.begin(), training.end());
  const FeatureNormalizer norm = FeatureNormalizer::fit(all);
  DiscriminatorModel m = cfg.arch == DiscriminatorArch::mlp ? train_mlp(norm, application, training, seed, cfg)
                                                            : train_logistic(norm, application, training, seed, cfg);
  m.n_application = application.size();
  m.n_training = training.size();
  return m;
}

DiscriminatorModel train_discriminator(std::span<const CandidateScenario> app_pool,
                                       std::span<const LabeledExample> training_sample, std::uint64_t seed,
                                       const DiscriminatorConfig& cfg) {
  std::vector<FeatureArray> app, trn;
  for (const auto& c : app_pool) app.push_back(c.features.to_array());
  for (const auto& e : training_sample) trn.push_back(e.features.to_array());
  return train_discriminator(app, trn, seed, cfg);
}

double discriminator_accuracy(const DiscriminatorModel& model, std::span<const FeatureArray> application,
                              std::span<const FeatureArray> training) {
  std::size_t correct = 0;
  for (const auto& r : application) correct += model.predict(r) >= 0.5 ? 1 : 0;
  for (const auto& r : training) correct += model.predict(r) < 0.5 ? 1 : 0;
  const std::size_t total = application.size() + training.size();
  if (total == 0) throw std::invalid_argument("discriminator_accuracy: no data");
  return static_cast<double>(correct) / static_cast<double>(total);
}

Point2 approach_start(const RoomPolygon& room, const Pose2D& user, double angle, double approach_length,
                      double* used_length) {
  double len = approach_length;
  while (len > 0.1) {
    const Pose2D p = robot_pose_on_approach(user, angle, len);
    if (room.contains(p.position())) {
      if (used_length) *used_length = len;
      return p.position();
    }
    len -= 0.05;
  }
  throw OutsideRoom("no approach start inside the room for this angle");
}

AngleSelection select_angles(const CandidateScorer& scorer, const CandidatePool& pool, int k) {
  std::map<double, std::vector<double>> by_angle;
  for (const auto& c : pool.candidates) {
    if (!c.labeled) by_angle[c.angle].push_back(scorer(c));
  }
  if (k < 1 || k > static_cast<int>(by_angle.size())) {
    throw std::invalid_argument("select_angles: k must be in [1, number of distinct unlabeled angles]");
  }
  struct Entry {
    double angle;
    double confidence;
  };
  std::vector<Entry> entries;
  for (auto& [angle, scores] : by_angle) {
    // Summing in sorted order keeps the mean independent of pool ordering.
    std::sort(scores.begin(), scores.end());
    double acc = 0.0;
    for (double s : scores) acc += s;
    entries.push_back({angle, acc / static_cast<double>(scores.size())});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.angle < b.angle;
  });

  AngleSelection sel;
  for (int i = 0; i < k; ++i) {
    const Entry& e = entries[static_cast<std::size_t>(i)];
    double used = pool.grid.approach_length;
    const Point2 start = approach_start(pool.room, pool.user, e.angle, pool.grid.approach_length, &used);
    sel.angles.push_back(e.angle);
    sel.confidences.push_back(e.confidence);
    sel.start_positions.push_back(start);
    sel.approach_lengths.push_back(used);
    if (used < pool.grid.approach_length) {
      std::ostringstream msg;
      msg << "approach at angle " << e.angle << " shortened to " << used << " m to stay inside the room";
      sel.adjustments.push_back(msg.str());
    }
  }
  return sel;
}

AngleSelection select_angles(const DiscriminatorModel& model, const CandidatePool& pool, int k) {
  return select_angles([&](const CandidateScenario& c) { return model.predict(c.features); }, pool, k);
}

double discomfort_ramp(double distance, double stop_distance, double kappa) {
  return 100.0 / (1.0 + std::exp(-kappa * (stop_distance - distance)));
}

std::vector<LabeledExample> stop_to_labels(double angle, double stop_distance, const RoomPolygon& room,
                                           const Pose2D& user, const StopLabelConfig& cfg) {
  if (!(stop_distance > 0.0 && stop_distance <= cfg.approach_length)) {
    throw std::invalid_argument("stop distance must lie in (0, approach_length]");
  }
  std::vector<LabeledExample> out;
  for (double d : cfg.distances) {
    if (d > cfg.approach_length + 1e-12) continue;
    const Pose2D robot = robot_pose_on_approach(user, angle, d);
    if (!room.contains(robot.position())) continue;
    out.push_back({extract_features(room, user, robot), discomfort_ramp(d, stop_distance, cfg.kappa),
                   ExampleSource::session});
  }
  return out;
}

const char* to_string(Strategy s) { return s == Strategy::atl ? "atl" : "random"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "atl") return Strategy::atl;
  if (s == "random" || s == "rs") return Strategy::random;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

SamplerState init_sampler(CandidatePool pool, std::vector<FeatureArray> training_domain, Strategy strategy,
                          std::uint64_t seed, const SamplerConfig& cfg) {
  if (pool.candidates.empty()) throw std::invalid_argument("init_sampler: empty candidate pool");
  if (cfg.angles_per_round < 1) throw std::invalid_argument("init_sampler: angles_per_round must be >= 1");
  SamplerState s{strategy, std::move(pool), std::move(training_domain), cfg, seed, std::mt19937_64(seed), {}, {}, {}, {},
                 0, 0};
  s.cfg.labels.approach_length = s.pool.grid.approach_length;
  if (strategy == Strategy::atl) {
    if (s.training_domain.empty()) throw std::invalid_argument("init_sampler: ATL needs training-domain features");
    retrain(s);
  }
  return s;
}

std::vector<double> plan_round(SamplerState& state) {
  std::vector<double> angles;
  if (state.strategy == Strategy::atl) {
    std::map<double, int> distinct;
    for (const auto& c : state.pool.candidates) {
      if (!c.labeled) distinct[c.angle] = 1;
    }
    if (distinct.empty()) throw std::runtime_error("plan_round: every candidate is already labeled");
    const int k = std::min(state.cfg.angles_per_round, static_cast<int>(distinct.size()));
    angles = select_angles(*state.discriminator, state.pool, k).angles;
  } else {
    std::vector<double> available;
    for (double a : state.pool.grid.angles) {
      if (std::any_of(state.pool.candidates.begin(), state.pool.candidates.end(),
                      [&](const CandidateScenario& c) { return c.angle == a; })) {
        available.push_back(a);
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, available.size() - 1);
    for (int i = 0; i < state.cfg.angles_per_round; ++i) angles.push_back(available[pick(state.rng)]);
  }
  ++state.round;
  state.selections.push_back(angles);
  return angles;
}

void record_stop(SamplerState& state, double angle, double stop_distance) {
  auto labels = stop_to_labels(angle, stop_distance, state.pool.room, state.pool.user, state.cfg.labels);
  state.labeled.insert(state.labeled.end(), labels.begin(), labels.end());
  for (auto& c : state.pool.candidates) {
    if (c.angle == angle && c.distance >= stop_distance - 1e-9) c.labeled = true;
  }
  state.approaches.push_back({state.round, angle, stop_distance});
}

void retrain(SamplerState& state) {
  if (state.strategy != Strategy::atl) return;
  std::vector<FeatureArray> app;
  app.reserve(state.pool.candidates.size() + state.labeled.size());
  for (const auto& c : state.pool.candidates) app.push_back(c.features.to_array());
  for (const auto& e : state.labeled) app.push_back(e.features.to_array());
  state.discriminator = train_discriminator(app, state.training_domain,
                                            state.seed + static_cast<std::uint64_t>(state.retrain_count),
                                            state.cfg.discriminator);
  ++state.retrain_count;
}

void run_round(SamplerState& state, const LabelProvider& provider) {
  const std::vector<double> angles = plan_round(state);
  for (double angle : angles) {
    double stop = 0.0;
    try {
      const Point2 start = approach_start(state.pool.room, state.pool.user, angle, state.pool.grid.approach_length);
      stop = provider(angle, start, state.round);
    } catch (const std::exception& e) {
      throw std::runtime_error("label provider failed in round " + std::to_string(state.round) + ": " + e.what());
    }
    record_stop(state, angle, stop);
  }
  retrain(state);
}

}  // namespace proxilab::atl
