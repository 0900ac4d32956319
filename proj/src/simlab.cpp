#include "proxilab/simlab.hpp"

#include "proxilab/errors.hpp"
#include "proxilab/rng.hpp"
#include "proxilab/stats/gpr.hpp"
#include "proxilab/stats/iforest.hpp"
#include "proxilab/stats/kde.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

namespace proxilab::simlab {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) { return std::mt19937_64(splitmix(seed ^ splitmix(tag))); }

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double bearing(const FeatureVector& f) { return std::atan2(f.hr_sin, f.hr_cos); }

// Draw-index bases that keep the arms' noise streams disjoint.
constexpr std::uint64_t kAtlDraws = 0;
constexpr std::uint64_t kRsDraws = 1'000'000;
constexpr std::uint64_t kValidationDraws = 2'000'000;
constexpr std::uint64_t kVirtualDraws = 3'000'000;
constexpr std::uint64_t kPhysicalDraws = 4'000'000;

}  // namespace

void SyntheticUser::validate() const {
  if (!(base_distance > 0.0)) throw std::invalid_argument("synthetic user: base_distance must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("synthetic user: noise_sigma must be >= 0");
  if (!(approach_length > 0.05)) throw std::invalid_argument("synthetic user: approach_length must exceed 0.05");
}

namespace {

double clip_stop(const SyntheticUser& user, double d) {
  return std::clamp(d, 0.05 + 1e-6, user.approach_length);
}

}  // namespace

double preferred_mean(const SyntheticUser& user, double angle) {
  return clip_stop(user, user.base_distance + user.angular_amplitude * std::cos(angle - user.angular_phase));
}

double preferred_distance(const SyntheticUser& user, double angle, std::uint64_t draw) {
  double d = user.base_distance + user.angular_amplitude * std::cos(angle - user.angular_phase);
  if (user.noise_sigma > 0.0) {
    std::mt19937_64 rng = stream(user.seed, draw);
    d += std::normal_distribution<double>(0.0, user.noise_sigma)(rng);
  }
  return clip_stop(user, d);
}

double ground_truth_discomfort(const SyntheticUser& user, const FeatureVector& f, double kappa) {
  return 100.0 * logistic(kappa * (preferred_mean(user, bearing(f)) - f.hr_dist));
}

const char* to_string(Preset p) {
  switch (p) {
    case Preset::flat: return "flat";
    case Preset::angled: return "angled";
    case Preset::shifted: return "shifted";
  }
  return "angled";
}

Preset preset_from_string(const std::string& s) {
  if (s == "flat") return Preset::flat;
  if (s == "angled") return Preset::angled;
  if (s == "shifted") return Preset::shifted;
  throw std::invalid_argument("unknown preset '" + s + "' (expected flat, angled or shifted)");
}

SyntheticUser sample_user(Preset preset, std::uint64_t seed) {
  std::mt19937_64 rng = stream(seed, 0x5e7);
  SyntheticUser u;
  u.seed = seed;
  switch (preset) {
    case Preset::flat:
      u.base_distance = uniform(rng, 0.6, 1.4);
      u.noise_sigma = 0.05;
      break;
    case Preset::angled:
      u.base_distance = uniform(rng, 0.6, 1.2);
      u.angular_amplitude = uniform(rng, 0.25, 0.5);
      u.angular_phase = uniform(rng, -0.4, 0.4);
      u.noise_sigma = 0.05;
      break;
    case Preset::shifted:
      u.base_distance = uniform(rng, 1.2, 1.4);
      u.angular_amplitude = uniform(rng, 0.4, 0.6);
      u.angular_phase = uniform(rng, -kPi / 2, kPi / 2);
      u.noise_sigma = 0.08;
      if (uniform(rng, 0.0, 1.0) < 0.7) {
        u.ar_physical_offset = std::max(0.1, std::normal_distribution<double>(0.35, 0.1)(rng));
      }
      break;
  }
  return u;
}

Environment sample_environment(std::uint64_t seed) {
  std::mt19937_64 rng = stream(seed, 0xe27);
  const double w = uniform(rng, 4.0, 7.0);
  const double h = uniform(rng, 4.0, 7.0);
  const double x = uniform(rng, -w / 2 + 0.8, w / 2 - 0.8);
  const double y = uniform(rng, -h / 2 + 0.8, h / 2 - 0.8);
  const double heading = uniform(rng, -kPi, kPi);
  return {make_rectangle(-w / 2, -h / 2, w / 2, h / 2), Pose2D(x, y, heading)};
}

std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, int n) {
  if (n < 0) throw std::invalid_argument("derive_seeds: n must be >= 0");
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(splitmix(seed * 1000003ULL + static_cast<std::uint64_t>(i)) >> 16);
  return out;
}

std::vector<SocNavScenario> make_socnav_fixture(int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("make_socnav_fixture: count must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> rating_noise(0.0, 8.0);
  std::vector<SocNavScenario> out;
  const Pose2D robot(0.0, 0.0, kPi / 2);

  while (static_cast<int>(out.size()) < count) {
    const double dist = uniform(rng, 0.2, 3.5);
    const double phi = uniform(rng, -kPi, kPi);
    const Pose2D human(dist * std::cos(phi), dist * std::sin(phi), uniform(rng, -kPi, kPi));

    const double min_x = std::min(0.0, human.x), max_x = std::max(0.0, human.x);
    const double min_y = std::min(0.0, human.y), max_y = std::max(0.0, human.y);
    const double ml = uniform(rng, 0.4, 2.5), mr = uniform(rng, 0.4, 2.5);
    const double mb = uniform(rng, 0.4, 2.5), mt = uniform(rng, 0.4, 2.5);
    const double x0 = min_x - ml, x1 = max_x + mr, y0 = min_y - mb, y1 = max_y + mt;

    std::vector<Point2> pts;
    if (mr > 0.8 && uniform(rng, 0.0, 1.0) < 0.3) {
      // L-shape: cut the top-right corner clear of both people.
      const double cx = max_x + uniform(rng, 0.2, mr - 0.2);
      const double cy = uniform(rng, y0 + 0.5, y1 - 0.2);
      pts = {{x0, y0}, {x1, y0}, {x1, cy}, {cx, cy}, {cx, y1}, {x0, y1}};
    } else {
      pts = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    }
    RoomPolygon room(pts);
    if (!room.contains(human.position()) || !room.contains(robot.position())) continue;

    SocNavScenario s{"fx" + std::to_string(out.size()), "robot", room, robot, {{"h0", human}}, {}, {}, 0};

    const double kind = uniform(rng, 0.0, 1.0);
    if (kind >= 0.85) {
      const int extra = kind >= 0.95 ? 2 : 1;
      for (int e = 0; e < extra; ++e) {
        const Point2 lo = room.min_corner(), hi = room.max_corner();
        for (int attempt = 0; attempt < 50; ++attempt) {
          const Pose2D other(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()), uniform(rng, -kPi, kPi));
          if (room.contains(other.position()) && (other.position() - robot.position()).norm() > 0.3) {
            s.humans.push_back({"h" + std::to_string(e + 1), other});
            break;
          }
        }
      }
      if (s.humans.size() > 1 && uniform(rng, 0.0, 1.0) < 0.5) s.interactions.emplace_back("h0", "h1");
    }
    const int n_objects = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int o = 0; o < n_objects; ++o) {
      const Point2 lo = room.min_corner(), hi = room.max_corner();
      const Pose2D obj(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()), 0.0);
      if (room.contains(obj.position())) s.objects.push_back({"o" + std::to_string(o), obj});
    }

    const FeatureVector f = extract_features(room, human, robot);
    // Distance explains only part of a rating; walls, facing and room size
    // carry the rest.
    const double comfort_distance = 0.9 + 0.4 * std::cos(bearing(f));
    const double robot_wall = std::min({f.r_n, f.r_s, f.r_w, f.r_e});
    double discomfort = 40.0 * logistic(2.0 * (comfort_distance - f.hr_dist)) + 30.0 * std::exp(-robot_wall) +
                        40.0 * (1.0 - f.o_cos) / 2.0 + 40.0 * std::exp(-f.a / 20.0);
    discomfort = std::clamp(discomfort + rating_noise(rng), 0.0, 100.0);
    s.score = static_cast<int>(std::lround(100.0 - discomfort));
    out.push_back(std::move(s));
  }
  return out;
}

void Study1Config::validate() const {
  if (rounds < 1 || angles_per_round < 1) throw std::invalid_argument("study1: rounds and angles_per_round must be >= 1");
  if (validation_approaches < 0 || test_approaches < 1) {
    throw std::invalid_argument("study1: need at least one test approach");
  }
  if (!(kappa > 0.0)) throw std::invalid_argument("study1: kappa must be positive");
}

namespace {

std::vector<double> point_angles(std::span<const LabeledExample> data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& e : data) out.push_back(bearing(e.features));
  return out;
}

std::vector<double> available_angles(const atl::CandidatePool& pool) {
  std::vector<double> out;
  for (double a : pool.grid.angles) {
    if (std::any_of(pool.candidates.begin(), pool.candidates.end(),
                    [&](const atl::CandidateScenario& c) { return c.angle == a; })) {
      out.push_back(a);
    }
  }
  return out;
}

double approach_limit(const atl::CandidatePool& pool, double angle) {
  double used = pool.grid.approach_length;
  atl::approach_start(pool.room, pool.user, angle, pool.grid.approach_length, &used);
  return used;
}

stats::TestResult safe_spearman(std::span<const double> x, std::span<const double> y) {
  try {
    return stats::spearman(x, y);
  } catch (const NumericalError&) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, static_cast<int>(x.size()) - 2};
  }
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

UserResult run_user(const ProxemicsNetwork& base, const atl::SamplerGrid& grid, const Study1Config& cfg,
                    std::uint64_t seed) {
  cfg.validate();
  if (base.meta.domain_sample.empty()) {
    throw std::invalid_argument("run_user: base model carries no training-domain sample");
  }
  UserResult r;
  r.seed = seed;
  r.user = sample_user(cfg.preset, seed);
  r.user.approach_length = grid.approach_length;
  const Environment env = sample_environment(seed);
  const atl::CandidatePool pool = atl::generate_pool(env.room, env.user, grid);
  const std::vector<double> angles = available_angles(pool);

  atl::SamplerConfig sc;
  sc.angles_per_round = cfg.angles_per_round;
  sc.labels = {grid.distances, grid.approach_length, cfg.kappa};
  sc.discriminator = cfg.discriminator;

  auto provider = [&](std::uint64_t base_draw) {
    return [&, draw = base_draw](double angle, const Point2& start, int) mutable {
      const double limit = (start - env.user.position()).norm();
      return std::min(preferred_distance(r.user, angle, draw++), limit);
    };
  };

  // ATL arm
  atl::SamplerState atl_state = atl::init_sampler(pool, base.meta.domain_sample, atl::Strategy::atl, seed, sc);
  {
    auto p = provider(kAtlDraws);
    for (int round = 0; round < cfg.rounds; ++round) atl::run_round(atl_state, p);
  }
  const std::vector<LabeledExample>& atl_train = atl_state.labeled;

  // RS arm: same approach count, topped up until it can match the ATL label count.
  atl::SamplerState rs_state = atl::init_sampler(pool, {}, atl::Strategy::random, splitmix(seed ^ 0x25), sc);
  {
    auto p = provider(kRsDraws);
    int round = 0;
    while (round < cfg.rounds || rs_state.labeled.size() < atl_train.size()) {
      if (round >= cfg.rounds * 10) throw std::runtime_error("run_user: random arm cannot match the ATL label count");
      atl::run_round(rs_state, p);
      ++round;
    }
  }
  std::vector<LabeledExample> rs_train;
  {
    std::vector<std::size_t> idx(rs_state.labeled.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng = stream(seed, 0x5b);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(atl_train.size());
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) rs_train.push_back(rs_state.labeled[i]);
  }

  // RS-gathered validation (stop labels) and test (oracle labels) sets.
  std::mt19937_64 pick_rng = stream(seed, 0x7e);
  std::uniform_int_distribution<std::size_t> pick(0, angles.size() - 1);
  std::vector<LabeledExample> validation, test;
  std::uint64_t draw = kValidationDraws;
  for (int i = 0; i < cfg.validation_approaches; ++i) {
    const double a = angles[pick(pick_rng)];
    const double stop = std::min(preferred_distance(r.user, a, draw++), approach_limit(pool, a));
    auto labels = atl::stop_to_labels(a, stop, env.room, env.user, sc.labels);
    validation.insert(validation.end(), labels.begin(), labels.end());
  }
  for (int i = 0; i < cfg.test_approaches; ++i) {
    const double a = angles[pick(pick_rng)];
    for (double d : grid.distances) {
      const Pose2D robot = atl::robot_pose_on_approach(env.user, a, d);
      if (!env.room.contains(robot.position())) continue;
      const FeatureVector f = extract_features(env.room, env.user, robot);
      test.push_back({f, ground_truth_discomfort(r.user, f, cfg.kappa), ExampleSource::synthetic});
    }
  }

  FineTuneConfig ft = cfg.fine_tune;
  ft.seed = seed;
  const ProxemicsNetwork atl_model = fine_tune(base, atl_train, ft, validation);
  const ProxemicsNetwork rs_model = fine_tune(base, rs_train, ft, validation);

  r.mae_base = mean_absolute_error(base, test, cfg.smooth);
  r.mae_atl = mean_absolute_error(atl_model, test, cfg.smooth);
  r.mae_rs = mean_absolute_error(rs_model, test, cfg.smooth);
  r.train_size = atl_train.size();
  r.rs_train_size = rs_train.size();
  r.atl_angles = point_angles(atl_train);
  r.rs_angles = point_angles(rs_train);
  r.atl_angle_std = stats::population_std(r.atl_angles);
  r.rs_angle_std = stats::population_std(r.rs_angles);

  std::vector<double> rs_all = r.rs_angles;
  for (const auto& set : {validation, test}) {
    const auto a = point_angles(set);
    rs_all.insert(rs_all.end(), a.begin(), a.end());
  }
  r.ks = stats::ks_statistic(r.atl_angles, rs_all);
  return r;
}

ExperimentReport run_study1(const ProxemicsNetwork& base, int n_users, const atl::SamplerGrid& grid,
                            const Study1Config& cfg, std::span<const std::uint64_t> seeds) {
  cfg.validate();
  if (n_users < 3) throw std::invalid_argument("run_study1: need at least 3 users");
  if (seeds.size() != static_cast<std::size_t>(n_users)) {
    throw std::invalid_argument("run_study1: seed list length must equal n_users");
  }
  ExperimentReport rep;
  rep.config = cfg;
  rep.users.resize(seeds.size());
  parallel_for(seeds.size(), cfg.threads, [&](std::size_t i) { rep.users[i] = run_user(base, grid, cfg, seeds[i]); });

  std::vector<double> atl, rs, nft, stds, maes, ks;
  double reduction = 0.0;
  for (const auto& u : rep.users) {
    atl.push_back(u.mae_atl);
    rs.push_back(u.mae_rs);
    nft.push_back(u.mae_base);
    ks.push_back(u.ks);
    if (u.mae_base > 0.0) reduction += (1.0 - u.mae_atl / u.mae_base) + (1.0 - u.mae_rs / u.mae_base);
  }
  rep.mean_relative_reduction = reduction / (2.0 * static_cast<double>(rep.users.size()));
  rep.mean_atl = stats::mean(atl);
  rep.std_atl = stats::sample_std(atl);
  rep.mean_rs = stats::mean(rs);
  rep.std_rs = stats::sample_std(rs);
  rep.mean_base = stats::mean(nft);
  rep.std_base = stats::sample_std(nft);

  auto row = [](const char* an, const std::vector<double>& a, const char* bn, const std::vector<double>& b) {
    return Comparison{an, bn, stats::mean(a), stats::sample_std(a), stats::mean(b), stats::sample_std(b),
                      stats::paired_t_lower(a, b)};
  };
  rep.test_matrix = {row("RS", rs, "ATL", atl), row("RS", rs, "notFT", nft), row("ATL", atl, "notFT", nft),
                     row("ATL", atl, "RS", rs)};

  for (const auto& u : rep.users) {
    stds.push_back(u.atl_angle_std);
    maes.push_back(u.mae_atl);
  }
  for (const auto& u : rep.users) {
    stds.push_back(u.rs_angle_std);
    maes.push_back(u.mae_rs);
  }
  rep.angle_std_spearman = safe_spearman(stds, maes);
  rep.ks_spearman = safe_spearman(ks, atl);
  return rep;
}

namespace {

json test_json(const stats::TestResult& t) {
  json j{{"statistic", t.statistic}, {"p_value", t.p_value}};
  j["df"] = t.df ? json(*t.df) : json(nullptr);
  return j;
}

json user_json(const SyntheticUser& u) {
  return {{"base_distance", u.base_distance}, {"angular_amplitude", u.angular_amplitude},
          {"angular_phase", u.angular_phase}, {"noise_sigma", u.noise_sigma},
          {"ar_physical_offset", u.ar_physical_offset}, {"seed", u.seed}};
}

}  // namespace

std::string report_to_json(const ExperimentReport& rep) {
  json users = json::array();
  for (const auto& u : rep.users) {
    users.push_back({{"seed", u.seed},
                     {"user", user_json(u.user)},
                     {"mae_atl", u.mae_atl},
                     {"mae_rs", u.mae_rs},
                     {"mae_not_fine_tuned", u.mae_base},
                     {"train_size", u.train_size},
                     {"atl_angle_std", u.atl_angle_std},
                     {"rs_angle_std", u.rs_angle_std},
                     {"ks", u.ks}});
  }
  json matrix = json::array();
  for (const auto& c : rep.test_matrix) {
    matrix.push_back({{"a", c.a},
                      {"b", c.b},
                      {"mean_a", c.mean_a},
                      {"std_a", c.std_a},
                      {"mean_b", c.mean_b},
                      {"std_b", c.std_b},
                      {"t", c.test.statistic},
                      {"p_value", c.test.p_value},
                      {"df", c.test.df.value_or(0)}});
  }
  const auto& cfg = rep.config;
  json j{{"kind", "study1"},
         {"config",
          {{"preset", to_string(cfg.preset)},
           {"rounds", cfg.rounds},
           {"angles_per_round", cfg.angles_per_round},
           {"validation_approaches", cfg.validation_approaches},
           {"test_approaches", cfg.test_approaches},
           {"kappa", cfg.kappa},
           {"smooth", cfg.smooth},
           {"fine_tune",
            {{"epochs", cfg.fine_tune.epochs},
             {"learning_rate", cfg.fine_tune.learning_rate},
             {"momentum", cfg.fine_tune.momentum},
             {"weight_decay", cfg.fine_tune.weight_decay},
             {"batch_size", cfg.fine_tune.batch_size}}}}},
         {"users", users},
         {"summary",
          {{"mean_mae_atl", rep.mean_atl},
           {"std_mae_atl", rep.std_atl},
           {"mean_mae_rs", rep.mean_rs},
           {"std_mae_rs", rep.std_rs},
           {"mean_mae_not_fine_tuned", rep.mean_base},
           {"std_mae_not_fine_tuned", rep.std_base},
           {"mean_relative_reduction", rep.mean_relative_reduction}}},
         {"test_matrix", matrix},
         {"angle_std_spearman", test_json(rep.angle_std_spearman)},
         {"ks_spearman", test_json(rep.ks_spearman)}};
  return j.dump(2);
}

void ReplicaConfig::validate() const {
  if (repeats < 1) throw std::invalid_argument("replica: repeats must be >= 1");
  if (planted_outliers < 0) throw std::invalid_argument("replica: planted_outliers must be >= 0");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw std::invalid_argument("replica: holdout_fraction must lie in (0, 1)");
  }
  if (!(bandwidth > 0.0)) throw std::invalid_argument("replica: bandwidth must be positive");
  if (grid_points < 2) throw std::invalid_argument("replica: grid_points must be >= 2");
}

namespace {

struct ConditionSamples {
  std::vector<double> angles;
  std::vector<double> distances;
  std::vector<bool> planted;
  std::vector<bool> inlier;
};

ConditionSamples simulate_condition(const SyntheticUser& user, std::span<const double> angles, const ReplicaConfig& cfg,
                                    std::uint64_t draw_base, std::uint64_t tag) {
  ConditionSamples c;
  std::uint64_t draw = draw_base;
  for (double a : angles) {
    for (int k = 0; k < cfg.repeats; ++k) {
      c.angles.push_back(a);
      c.distances.push_back(preferred_distance(user, a, draw++));
      c.planted.push_back(false);
    }
  }
  std::mt19937_64 rng = stream(user.seed, tag);
  std::uniform_int_distribution<std::size_t> pick(0, angles.size() - 1);
  for (int k = 0; k < cfg.planted_outliers; ++k) {
    c.angles.push_back(angles[pick(rng)]);
    c.distances.push_back(cfg.outlier_distance);
    c.planted.push_back(true);
  }
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(c.angles.size()), 2);
  for (std::size_t i = 0; i < c.angles.size(); ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = c.angles[i];
    pts(static_cast<Eigen::Index>(i), 1) = c.distances[i];
  }
  stats::IsolationForestConfig fc;
  fc.seed = cfg.forest_seed ^ splitmix(user.seed ^ tag);
  c.inlier = stats::isolation_forest(stats::standardize_columns(pts), fc).inlier;
  return c;
}

double masked_mean(const ConditionSamples& c, bool inliers_only) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.distances.size(); ++i) {
    if (inliers_only && !c.inlier[i]) continue;
    acc += c.distances[i];
    ++n;
  }
  return n ? acc / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

double angle_mode(const ConditionSamples& c, double angle, const std::vector<double>& grid, double bandwidth) {
  std::vector<double> kept, all;
  for (std::size_t i = 0; i < c.angles.size(); ++i) {
    if (c.angles[i] != angle) continue;
    all.push_back(c.distances[i]);
    if (c.inlier[i]) kept.push_back(c.distances[i]);
  }
  const auto& use = kept.empty() ? all : kept;
  return stats::kde_mode(stats::KdeModel::from_values(use, bandwidth), grid);
}

}  // namespace

ReplicaReport run_ar_physical_replica(int n_users, const ReplicaConfig& cfg, std::span<const std::uint64_t> seeds) {
  cfg.validate();
  if (n_users < 2) throw std::invalid_argument("replica: need at least 2 users");
  if (seeds.size() != static_cast<std::size_t>(n_users)) {
    throw std::invalid_argument("replica: seed list length must equal n_users");
  }
  const std::vector<double> angles = atl::SamplerGrid::defaults().angles;
  const std::vector<double> grid = stats::linspace(0.0, 4.0, cfg.grid_points);

  ReplicaReport rep;
  rep.config = cfg;
  std::size_t planted = 0, planted_removed = 0;
  for (std::uint64_t seed : seeds) {
    ReplicaUser ru;
    ru.seed = seed;
    ru.user = sample_user(cfg.preset, seed);
    SyntheticUser physical = ru.user;
    physical.base_distance += ru.user.ar_physical_offset;

    const ConditionSamples v = simulate_condition(ru.user, angles, cfg, kVirtualDraws, 0xa1);
    const ConditionSamples p = simulate_condition(physical, angles, cfg, kPhysicalDraws, 0xb2);
    for (const auto* c : {&v, &p}) {
      for (std::size_t i = 0; i < c->planted.size(); ++i) {
        if (c->planted[i]) {
          ++ru.planted;
          if (!c->inlier[i]) ++ru.planted_removed;
        }
        if (!c->inlier[i]) ++ru.removed_total;
      }
    }
    planted += ru.planted;
    planted_removed += ru.planted_removed;
    ru.abs_mean_diff_raw = std::abs(masked_mean(v, false) - masked_mean(p, false));
    ru.abs_mean_diff_cleaned = std::abs(masked_mean(v, true) - masked_mean(p, true));
    ru.angles = angles;
    for (double a : angles) {
      ru.virtual_modes.push_back(angle_mode(v, a, grid, cfg.bandwidth));
      ru.physical_modes.push_back(angle_mode(p, a, grid, cfg.bandwidth));
    }
    rep.users.push_back(std::move(ru));
  }
  rep.outlier_recall = planted ? static_cast<double>(planted_removed) / static_cast<double>(planted) : 1.0;

  // Held-out users: the smallest seed hashes, so the split is independent of seed order.
  std::vector<std::size_t> order(rep.users.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ha = splitmix(rep.users[a].seed), hb = splitmix(rep.users[b].seed);
    return ha != hb ? ha < hb : rep.users[a].seed < rep.users[b].seed;
  });
  std::size_t n_hold = static_cast<std::size_t>(std::ceil(cfg.holdout_fraction * static_cast<double>(n_users)));
  n_hold = std::clamp<std::size_t>(n_hold, 1, rep.users.size() - 1);
  for (std::size_t i = 0; i < n_hold; ++i) rep.users[order[i]].held_out = true;

  std::vector<double> xs, ys;
  for (const auto& u : rep.users) {
    if (u.held_out) continue;
    xs.insert(xs.end(), u.virtual_modes.begin(), u.virtual_modes.end());
    ys.insert(ys.end(), u.physical_modes.begin(), u.physical_modes.end());
  }
  const Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  stats::GprConfig gc;
  gc.noise_variance = cfg.gpr_noise;
  const stats::GprModel gpr = stats::gpr_fit(X, Y, gc);

  double sq = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) sq += std::pow(gpr.predict_mean(xs[i]) - ys[i], 2);
  rep.train_rmse = std::sqrt(sq / static_cast<double>(xs.size()));

  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  const std::vector<double> probe = stats::linspace(*lo, *hi, 50);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(probe.size()), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(probe.size()));
  for (std::size_t i = 0; i < probe.size(); ++i) {
    A(static_cast<Eigen::Index>(i), 0) = probe[i];
    A(static_cast<Eigen::Index>(i), 1) = 1.0;
    b(static_cast<Eigen::Index>(i)) = gpr.predict_mean(probe[i]);
  }
  const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
  rep.fit_slope = *lo < *hi ? coef(0) : std::numeric_limits<double>::quiet_NaN();
  rep.fit_intercept = coef(1);

  double gpr_err = 0.0, naive_err = 0.0, raw = 0.0, cleaned = 0.0;
  for (auto& u : rep.users) {
    raw += u.abs_mean_diff_raw;
    cleaned += u.abs_mean_diff_cleaned;
    if (!u.held_out) continue;
    double ge = 0.0, ne = 0.0;
    for (std::size_t a = 0; a < u.angles.size(); ++a) {
      const double pred = gpr.predict_mean(u.virtual_modes[a]);
      u.predicted_physical.push_back(pred);
      ge += std::abs(pred - u.physical_modes[a]);
      ne += std::abs(u.virtual_modes[a] - u.physical_modes[a]);
    }
    u.gpr_error = ge / static_cast<double>(u.angles.size());
    u.naive_error = ne / static_cast<double>(u.angles.size());
    gpr_err += u.gpr_error;
    naive_err += u.naive_error;
  }
  rep.heldout_gpr_error = gpr_err / static_cast<double>(n_hold);
  rep.heldout_naive_error = naive_err / static_cast<double>(n_hold);
  rep.mean_abs_diff_raw = raw / static_cast<double>(rep.users.size());
  rep.mean_abs_diff_cleaned = cleaned / static_cast<double>(rep.users.size());
  return rep;
}

std::string replica_to_json(const ReplicaReport& rep) {
  json users = json::array();
  for (const auto& u : rep.users) {
    json ju{{"seed", u.seed},
            {"user", user_json(u.user)},
            {"held_out", u.held_out},
            {"angles", u.angles},
            {"virtual_modes", u.virtual_modes},
            {"physical_modes", u.physical_modes},
            {"planted", u.planted},
            {"planted_removed", u.planted_removed},
            {"removed_total", u.removed_total},
            {"abs_mean_diff_raw", u.abs_mean_diff_raw},
            {"abs_mean_diff_cleaned", u.abs_mean_diff_cleaned}};
    if (u.held_out) {
      ju["predicted_physical"] = u.predicted_physical;
      ju["gpr_error"] = u.gpr_error;
      ju["naive_error"] = u.naive_error;
    }
    users.push_back(std::move(ju));
  }
  const auto& c = rep.config;
  json j{{"kind", "ar_physical_replica"},
         {"config",
          {{"preset", to_string(c.preset)},
           {"repeats", c.repeats},
           {"planted_outliers", c.planted_outliers},
           {"outlier_distance", c.outlier_distance},
           {"holdout_fraction", c.holdout_fraction},
           {"bandwidth", c.bandwidth},
           {"gpr_noise", c.gpr_noise}}},
         {"users", users},
         {"summary",
          {{"outlier_recall", rep.outlier_recall},
           {"mean_abs_diff_raw", rep.mean_abs_diff_raw},
           {"mean_abs_diff_cleaned", rep.mean_abs_diff_cleaned},
           {"heldout_gpr_error", rep.heldout_gpr_error},
           {"heldout_naive_error", rep.heldout_naive_error},
           {"fit_slope", rep.fit_slope},
           {"fit_intercept", rep.fit_intercept},
           {"train_rmse", rep.train_rmse}}}};
  return j.dump(2);
}

}  // namespace proxilab::simlab
