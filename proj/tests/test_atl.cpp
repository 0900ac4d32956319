#include "proxilab/atl.hpp"
#include "proxilab/errors.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace proxilab;
using namespace proxilab::atl;

namespace {

const RoomPolygon kBigRoom = make_rectangle(-6.0, -6.0, 6.0, 6.0);
const Pose2D kCentre{0.0, 0.0, std::numbers::pi / 2};

std::vector<FeatureArray> domain_rows(const RoomPolygon& room, const Pose2D& user, std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> dist(0.4, 1.5);
  std::vector<FeatureArray> rows;
  while (static_cast<int>(rows.size()) < n) {
    const auto robot = robot_pose_on_approach(user, ang(rng), dist(rng));
    if (!room.contains(robot.position())) continue;
    rows.push_back(extract_features(room, user, robot).to_array());
  }
  return rows;
}

}  // namespace

TEST_CASE("pool covers the full grid in an open room") {
  const auto grid = SamplerGrid::defaults();
  const auto pool = generate_pool(kBigRoom, kCentre, grid);
  CHECK(pool.candidates.size() == 162);
  CHECK(pool.dropped == 0);
  for (const auto& c : pool.candidates) {
    CHECK(c.features.hr_dist == doctest::Approx(c.distance).epsilon(1e-9));
    CHECK(kBigRoom.contains(c.robot_position));
    CHECK_FALSE(c.labeled);
    // The robot faces the user.
    CHECK(std::abs(c.features.hr_sin) + std::abs(c.features.hr_cos) > 0.0);
  }
}

TEST_CASE("pool drops candidates outside the room") {
  const Pose2D near_wall{0.0, -5.5, std::numbers::pi / 2};
  const Pose2D facing_wall{0.0, -5.5, -std::numbers::pi / 2};
  const auto grid = SamplerGrid::defaults();
  const auto open = generate_pool(kBigRoom, near_wall, grid);
  CHECK(open.candidates.size() == 162);
  const auto blocked = generate_pool(kBigRoom, facing_wall, grid);
  CHECK(blocked.candidates.size() < 162);
  CHECK(blocked.dropped + blocked.candidates.size() == 162);
  CHECK_THROWS_AS(generate_pool(kBigRoom, Pose2D{7.0, 0.0, 0.0}, grid), OutsideRoom);
  SamplerGrid empty;
  CHECK_THROWS_AS(generate_pool(kBigRoom, kCentre, empty), std::invalid_argument);
}

TEST_CASE("stop labels follow the logistic ramp") {
  CHECK(discomfort_ramp(1.0, 1.0, 4.0) == doctest::Approx(50.0));
  CHECK(discomfort_ramp(2.9, 0.9, 4.0) == doctest::Approx(0.034).epsilon(1e-2));
  const auto labels = stop_to_labels(0.0, 0.8, kBigRoom, kCentre, StopLabelConfig{});
  REQUIRE(labels.size() == 18);
  for (std::size_t i = 1; i < labels.size(); ++i) {
    CHECK(labels[i].features.hr_dist > labels[i - 1].features.hr_dist);
    CHECK(labels[i].discomfort <= labels[i - 1].discomfort);
  }
  CHECK_THROWS_AS(stop_to_labels(0.0, 0.0, kBigRoom, kCentre, StopLabelConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(stop_to_labels(0.0, 2.5, kBigRoom, kCentre, StopLabelConfig{}), std::invalid_argument);
}

TEST_CASE("discriminator separates disjoint domains") {
  const auto grid = SamplerGrid::defaults();
  auto near = domain_rows(kBigRoom, kCentre, 1, 200);
  std::vector<FeatureArray> far;
  const RoomPolygon small = make_rectangle(-1.5, -1.5, 1.5, 1.5);
  far = domain_rows(small, kCentre, 2, 200);
  std::vector<FeatureArray> near_train(near.begin(), near.begin() + 150), near_test(near.begin() + 150, near.end());
  std::vector<FeatureArray> far_train(far.begin(), far.begin() + 150), far_test(far.begin() + 150, far.end());
  const auto model = train_discriminator(near_train, far_train, 3);
  CHECK(discriminator_accuracy(model, near_test, far_test) >= 0.9);
  CHECK(train_discriminator(near_train, far_train, 3) == model);
  CHECK_THROWS_AS(train_discriminator(std::span<const FeatureArray>{}, far_train, 3), std::invalid_argument);
  (void)grid;
}

TEST_CASE("discriminator cannot tell identical domains apart") {
  const auto rows = domain_rows(kBigRoom, kCentre, 4, 200);
  const auto model = train_discriminator(rows, rows, 5);
  CHECK(discriminator_accuracy(model, rows, rows) == doctest::Approx(0.5).epsilon(0.2));
  for (const auto& r : rows) CHECK(model.predict(r) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("angle selection by a constructed scorer") {
  const auto pool = generate_pool(kBigRoom, kCentre, SamplerGrid::defaults());
  const auto by_abs = select_angles([](const CandidateScenario& c) { return std::abs(c.angle) / std::numbers::pi; },
                                    pool, 2);
  REQUIRE(by_abs.angles.size() == 2);
  CHECK(by_abs.angles[0] == doctest::Approx(-std::numbers::pi / 2));
  CHECK(by_abs.angles[1] == doctest::Approx(std::numbers::pi / 2));
  for (std::size_t i = 0; i < by_abs.angles.size(); ++i) {
    CHECK(kBigRoom.contains(by_abs.start_positions[i]));
    CHECK((by_abs.start_positions[i] - kCentre.position()).norm() == doctest::Approx(2.0));
  }

  const auto tie = select_angles([](const CandidateScenario&) { return 0.5; }, pool, 3);
  const auto& g = pool.grid.angles;
  CHECK(tie.angles == std::vector<double>{g[0], g[1], g[2]});

  const auto all = select_angles([](const CandidateScenario& c) { return c.angle; }, pool, 9);
  CHECK(all.angles.size() == 9);
  CHECK(std::is_sorted(all.confidences.rbegin(), all.confidences.rend()));

  CHECK_THROWS_AS(select_angles([](const CandidateScenario&) { return 0.0; }, pool, 0), std::invalid_argument);
  CHECK_THROWS_AS(select_angles([](const CandidateScenario&) { return 0.0; }, pool, 10), std::invalid_argument);
}

TEST_CASE("angle selection ignores pool order") {
  auto pool = generate_pool(kBigRoom, kCentre, SamplerGrid::defaults());
  auto scorer = [](const CandidateScenario& c) { return std::sin(3.0 * c.angle) + 0.1 * c.distance; };
  const auto a = select_angles(scorer, pool, 4);
  std::mt19937_64 rng(1);
  std::shuffle(pool.candidates.begin(), pool.candidates.end(), rng);
  const auto b = select_angles(scorer, pool, 4);
  CHECK(a.angles == b.angles);
}

TEST_CASE("approach start is shortened near walls") {
  const RoomPolygon room = make_rectangle(-1.0, -1.0, 1.0, 3.0);
  double used = 0.0;
  const Pose2D user{0.0, 0.0, std::numbers::pi / 2};
  const auto start = approach_start(room, user, std::numbers::pi / 2, 2.0, &used);
  CHECK(room.contains(start));
  CHECK(used < 2.0);
  CHECK(used > 0.8);
  const auto ahead = approach_start(room, user, 0.0, 2.0, &used);
  CHECK(used == 2.0);
  CHECK(ahead.y() == doctest::Approx(2.0));
}

TEST_CASE("rounds record R times k approaches and mark passed candidates") {
  const auto grid = SamplerGrid::defaults();
  auto st = init_sampler(generate_pool(kBigRoom, kCentre, grid), domain_rows(kBigRoom, kCentre, 7, 100),
                         Strategy::atl, 11);
  for (int r = 0; r < 3; ++r) run_round(st, [](double, const Point2&, int) { return 0.75; });
  CHECK(st.approaches.size() == 9);
  CHECK(st.round == 3);
  CHECK(st.selections.size() == 3);
  CHECK(st.labeled.size() == 9 * 18);
  CHECK(st.retrain_count >= 3);
  for (const auto& c : st.pool.candidates) {
    const bool visited = std::any_of(st.approaches.begin(), st.approaches.end(),
                                     [&](const ApproachOutcome& o) { return o.angle == c.angle; });
    if (c.labeled) CHECK(visited);
    if (visited) CHECK(c.labeled == (c.distance >= 0.75 - 1e-12));
  }
}

TEST_CASE("selection moves as labels come in") {
  const auto grid = SamplerGrid::defaults();
  auto st = init_sampler(generate_pool(kBigRoom, kCentre, grid), domain_rows(kBigRoom, kCentre, 8, 100),
                         Strategy::atl, 12);
  // The simulated user tolerates the robot closer every round, so the chosen
  // angles run out of unlabeled candidates.
  for (int r = 0; r < 5; ++r) {
    run_round(st, [](double, const Point2&, int round) { return std::max(0.3, 1.5 - 0.5 * round); });
  }
  std::set<std::vector<double>> distinct(st.selections.begin(), st.selections.end());
  CHECK(distinct.size() > 1);
}

TEST_CASE("exhausted pool is reported") {
  const auto grid = SamplerGrid::defaults();
  auto st = init_sampler(generate_pool(kBigRoom, kCentre, grid), domain_rows(kBigRoom, kCentre, 9, 50), Strategy::atl,
                         1);
  for (double a : grid.angles) record_stop(st, a, 0.3);
  CHECK_THROWS_AS(plan_round(st), std::runtime_error);
}

TEST_CASE("random strategy is reproducible") {
  const auto grid = SamplerGrid::defaults();
  auto make = [&](std::uint64_t seed) {
    auto st = init_sampler(generate_pool(kBigRoom, kCentre, grid), {}, Strategy::random, seed);
    for (int r = 0; r < 4; ++r) run_round(st, [](double, const Point2&, int) { return 1.0; });
    return st.selections;
  };
  CHECK(make(3) == make(3));
  CHECK(make(3) != make(4));
  for (const auto& sel : make(5)) {
    for (double a : sel) CHECK(std::find(grid.angles.begin(), grid.angles.end(), a) != grid.angles.end());
  }
  CHECK(strategy_from_string(to_string(Strategy::random)) == Strategy::random);
  CHECK_THROWS_AS(strategy_from_string("greedy"), std::invalid_argument);
}
