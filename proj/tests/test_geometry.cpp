#include "proxilab/errors.hpp"
#include "proxilab/geometry.hpp"

#include "doctest.h"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

using namespace proxilab;

namespace {

constexpr double kPi = std::numbers::pi;

RoomPolygon l_shape() { return RoomPolygon({{0, 0}, {4, 0}, {4, 2}, {2, 2}, {2, 4}, {0, 4}}); }

}  // namespace

TEST_CASE("polygon_area") {
  CHECK(polygon_area(make_rectangle(0, 0, 1, 1)) == doctest::Approx(1.0));
  CHECK(polygon_area(make_rectangle(0, 0, 6, 4)) == doctest::Approx(24.0));
  CHECK(polygon_area(l_shape()) == doctest::Approx(12.0));
}

TEST_CASE("room construction normalizes and rejects bad outlines") {
  RoomPolygon cw({{0, 0}, {0, 4}, {6, 4}, {6, 0}});
  CHECK(cw.area() == doctest::Approx(24.0));
  // stored counter-clockwise: signed area positive
  double signed_area = 0.0;
  const auto& v = cw.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    signed_area += a.x() * b.y() - b.x() * a.y();
  }
  CHECK(signed_area > 0.0);

  CHECK_THROWS_AS(RoomPolygon({{0, 0}, {1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(RoomPolygon({{0, 0}, {1, 1}, {2, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(RoomPolygon({{0, 0}, {2, 2}, {2, 0}, {0, 2}}), std::invalid_argument);  // bow tie
  CHECK(RoomPolygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}}).size() == 4);
}

TEST_CASE("boundary_distances") {
  const auto d = boundary_distances({1, 1}, make_rectangle(0, 0, 2, 2));
  CHECK(d.n == doctest::Approx(1.0));
  CHECK(d.s == doctest::Approx(1.0));
  CHECK(d.w == doctest::Approx(1.0));
  CHECK(d.e == doctest::Approx(1.0));

  const auto r = boundary_distances({3, 2}, make_rectangle(0, 0, 6, 4));
  CHECK(r.n == doctest::Approx(2.0));
  CHECK(r.s == doctest::Approx(2.0));
  CHECK(r.w == doctest::Approx(3.0));
  CHECK(r.e == doctest::Approx(3.0));

  CHECK_THROWS_AS(boundary_distances({5, 5}, make_rectangle(0, 0, 1, 1)), OutsideRoom);
  CHECK_THROWS_AS(boundary_distances({1, 0}, make_rectangle(0, 0, 2, 2)), OutsideRoom);
}

TEST_CASE("boundary_distances in a concave room takes the nearest wall") {
  const auto d = boundary_distances({1, 1}, l_shape());
  CHECK(d.n == doctest::Approx(3.0));
  CHECK(d.e == doctest::Approx(3.0));
  const auto e = boundary_distances({3, 1}, l_shape());
  CHECK(e.n == doctest::Approx(1.0));
  CHECK(e.w == doctest::Approx(3.0));
}

TEST_CASE("boundary_distances in a rectangle equals the axis-aligned gaps") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  const auto room = make_rectangle(-2, 1, 5, 4);
  for (int i = 0; i < 200; ++i) {
    const Point2 p(-2 + 7 * u(rng), 1 + 3 * u(rng));
    const auto d = boundary_distances(p, room);
    CHECK(d.n == doctest::Approx(4 - p.y()).epsilon(1e-12));
    CHECK(d.s == doctest::Approx(p.y() - 1).epsilon(1e-12));
    CHECK(d.w == doctest::Approx(p.x() + 2).epsilon(1e-12));
    CHECK(d.e == doctest::Approx(5 - p.x()).epsilon(1e-12));
  }
}

TEST_CASE("extract_features worked example") {
  const auto f = extract_features(make_rectangle(0, 0, 6, 4), Pose2D(3, 2, 0), Pose2D(4, 2, kPi));
  CHECK(f.hr_dist == doctest::Approx(1.0));
  CHECK(f.hr_sin == doctest::Approx(0.0));
  CHECK(f.hr_cos == doctest::Approx(1.0));
  CHECK(f.o_sin == doctest::Approx(0.0));
  CHECK(f.o_cos == doctest::Approx(-1.0));
  CHECK(f.h_n == doctest::Approx(2.0));
  CHECK(f.h_s == doctest::Approx(2.0));
  CHECK(f.h_w == doctest::Approx(3.0));
  CHECK(f.h_e == doctest::Approx(3.0));
  CHECK(f.r_n == doctest::Approx(2.0));
  CHECK(f.r_s == doctest::Approx(2.0));
  CHECK(f.r_w == doctest::Approx(4.0));
  CHECK(f.r_e == doctest::Approx(2.0));
  CHECK(f.a == doctest::Approx(24.0));
  CHECK(f.valid());
}

TEST_CASE("extract_features bearings and errors") {
  const auto room = make_rectangle(0, 0, 6, 4);
  const auto behind = extract_features(room, Pose2D(3, 2, 0), Pose2D(2, 2, 0));
  CHECK(behind.hr_sin == doctest::Approx(0.0));
  CHECK(behind.hr_cos == doctest::Approx(-1.0));
  const auto left = extract_features(room, Pose2D(3, 2, 0), Pose2D(3, 3, 0));
  CHECK(left.hr_sin == doctest::Approx(1.0));

  CHECK_THROWS_AS(extract_features(room, Pose2D(3, 2, 0), Pose2D(3, 2, 1)), DegenerateScenario);
  CHECK_THROWS_AS(extract_features(room, Pose2D(3, 2, 0), Pose2D(7, 2, 0)), OutsideRoom);
}

TEST_CASE("heading normalization") {
  CHECK(Pose2D(0, 0, 3 * kPi).heading == doctest::Approx(kPi));
  CHECK(Pose2D(0, 0, -kPi).heading == doctest::Approx(kPi));
  CHECK(normalize_angle(2 * kPi + 0.5) == doctest::Approx(0.5));
}

TEST_CASE("rotation about the human keeps the invariant subset") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  const RoomPolygon room = l_shape();
  const Pose2D human(1.0, 1.0, 0.3);
  const Pose2D robot(1.2, 2.5, -2.0);
  const auto f0 = extract_features(room, human, robot);
  for (int i = 0; i < 50; ++i) {
    const double t = ang(rng);
    const Point2 pivot = human.position();
    const auto r = room.transformed(t, pivot, Point2::Zero());
    const Eigen::Rotation2Dd rot(t);
    const Point2 rp = pivot + rot * (robot.position() - pivot);
    const auto f = extract_features(r, Pose2D(human.x, human.y, human.heading + t), Pose2D(rp.x(), rp.y(), robot.heading + t));
    CHECK(f.hr_dist == doctest::Approx(f0.hr_dist).epsilon(1e-12));
    CHECK(f.hr_sin == doctest::Approx(f0.hr_sin).epsilon(1e-9));
    CHECK(f.hr_cos == doctest::Approx(f0.hr_cos).epsilon(1e-9));
    CHECK(f.o_sin == doctest::Approx(f0.o_sin).epsilon(1e-9));
    CHECK(f.o_cos == doctest::Approx(f0.o_cos).epsilon(1e-9));
    CHECK(f.a == doctest::Approx(f0.a).epsilon(1e-9));
  }
}

TEST_CASE("translation leaves every feature unchanged") {
  const RoomPolygon room = l_shape();
  const Pose2D human(1.0, 1.0, 0.3), robot(3.0, 1.5, 2.0);
  const auto f0 = extract_features(room, human, robot).to_array();
  const Point2 off(-7.25, 3.5);
  const auto moved = room.transformed(0.0, Point2::Zero(), off);
  const auto f = extract_features(moved, Pose2D(human.x + off.x(), human.y + off.y(), human.heading),
                                  Pose2D(robot.x + off.x(), robot.y + off.y(), robot.heading))
                     .to_array();
  for (int i = 0; i < kFeatureCount; ++i) CHECK(f(i) == doctest::Approx(f0(i)).epsilon(1e-9));
}

TEST_CASE("feature array round trip and names") {
  const auto f = extract_features(make_rectangle(0, 0, 6, 4), Pose2D(3, 2, 0.4), Pose2D(4.5, 3.1, -1.0));
  CHECK(FeatureVector::from_array(f.to_array()) == f);
  CHECK(std::string(feature_names()[0]) == "hr_dist");
  CHECK(std::string(feature_names()[13]) == "a");
}
