#include "proxilab/geometry.hpp"

#include "proxilab/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace proxilab {

namespace {

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::vector<Point2>& v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += cross(v[i], v[(i + 1) % v.size()]);
  }
  return 0.5 * acc;
}

int orientation(const Point2& a, const Point2& b, const Point2& c) {
  const double v = cross(b - a, c - a);
  const double scale = std::max({1.0, (b - a).norm(), (c - a).norm()});
  if (std::abs(v) <= 1e-12 * scale * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x(), b.x()) - 1e-12 <= p.x() && p.x() <= std::max(a.x(), b.x()) + 1e-12 &&
         std::min(a.y(), b.y()) - 1e-12 <= p.y() && p.y() <= std::max(a.y(), b.y()) + 1e-12;
}

bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

double normalize_angle(double radians) {
  if (!std::isfinite(radians)) throw std::invalid_argument("angle must be finite");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(radians, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

Pose2D::Pose2D(double x_, double y_, double heading_) : x(x_), y(y_), heading(normalize_angle(heading_)) {
  if (!std::isfinite(x) || !std::isfinite(y)) throw std::invalid_argument("pose coordinates must be finite");
}

RoomPolygon::RoomPolygon(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() >= 2 && (vertices_.front() - vertices_.back()).norm() < 1e-12) {
    vertices_.pop_back();
  }
  if (vertices_.size() < 3) throw std::invalid_argument("room polygon needs at least 3 vertices");
  for (const auto& v : vertices_) {
    if (!v.allFinite()) throw std::invalid_argument("room vertices must be finite");
  }
  const double sa = signed_area(vertices_);
  if (std::abs(sa) < 1e-12) throw std::invalid_argument("room polygon is degenerate (zero area)");
  if (sa < 0) std::reverse(vertices_.begin(), vertices_.end());
  area_ = std::abs(sa);

  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if ((vertices_[i] - vertices_[(i + 1) % n]).norm() < 1e-12) {
      throw std::invalid_argument("room polygon has repeated vertices");
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(vertices_[i], vertices_[(i + 1) % n], vertices_[j], vertices_[(j + 1) % n])) {
        throw std::invalid_argument("room polygon is self-intersecting");
      }
    }
  }
}

bool RoomPolygon::on_boundary(const Point2& p, double tol) const {
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (point_segment_distance(p, vertices_[i], vertices_[(i + 1) % n]) <= tol) return true;
  }
  return false;
}

bool RoomPolygon::contains(const Point2& p) const {
  if (!p.allFinite() || on_boundary(p)) return false;
  bool inside = false;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = vertices_[i];
    const Point2& b = vertices_[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

Point2 RoomPolygon::min_corner() const {
  Point2 m = vertices_.front();
  for (const auto& v : vertices_) m = m.cwiseMin(v);
  return m;
}

Point2 RoomPolygon::max_corner() const {
  Point2 m = vertices_.front();
  for (const auto& v : vertices_) m = m.cwiseMax(v);
  return m;
}

RoomPolygon RoomPolygon::transformed(double angle, const Point2& pivot, const Point2& offset) const {
  const Eigen::Rotation2Dd rot(angle);
  std::vector<Point2> out;
  out.reserve(vertices_.size());
  for (const auto& v : vertices_) out.push_back(rot * (v - pivot) + pivot + offset);
  return RoomPolygon(std::move(out));
}

RoomPolygon make_rectangle(double x0, double y0, double x1, double y1) {
  return RoomPolygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

double polygon_area(const RoomPolygon& room) { return room.area(); }

double ray_to_wall(const Point2& origin, const Point2& direction, const RoomPolygon& room) {
  const auto& v = room.vertices();
  const std::size_t n = v.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = v[i];
    const Point2 ab = v[(i + 1) % n] - a;
    const double denom = cross(direction, ab);
    if (std::abs(denom) < 1e-15) continue;  // parallel; neighbours catch the endpoints
    const Point2 ao = a - origin;
    const double t = cross(ao, ab) / denom;
    const double u = cross(ao, direction) / denom;
    if (t > 0.0 && u >= -1e-12 && u <= 1.0 + 1e-12) best = std::min(best, t);
  }
  return best;
}

CardinalDistances boundary_distances(const Point2& point, const RoomPolygon& room) {
  if (!room.contains(point)) throw OutsideRoom("point is not strictly inside the room");
  return {ray_to_wall(point, {0.0, 1.0}, room), ray_to_wall(point, {0.0, -1.0}, room),
          ray_to_wall(point, {-1.0, 0.0}, room), ray_to_wall(point, {1.0, 0.0}, room)};
}

FeatureArray FeatureVector::to_array() const {
  FeatureArray v;
  v << hr_dist, hr_sin, hr_cos, o_sin, o_cos, h_n, h_s, h_w, h_e, r_n, r_s, r_w, r_e, a;
  return v;
}

FeatureVector FeatureVector::from_array(const FeatureArray& v) {
  return from_span(std::span<const double>(v.data(), kFeatureCount));
}

FeatureVector FeatureVector::from_span(std::span<const double> v) {
  if (v.size() != kFeatureCount) throw std::invalid_argument("feature vector needs 14 values");
  FeatureVector f;
  f.hr_dist = v[0];
  f.hr_sin = v[1];
  f.hr_cos = v[2];
  f.o_sin = v[3];
  f.o_cos = v[4];
  f.h_n = v[5];
  f.h_s = v[6];
  f.h_w = v[7];
  f.h_e = v[8];
  f.r_n = v[9];
  f.r_s = v[10];
  f.r_w = v[11];
  f.r_e = v[12];
  f.a = v[13];
  return f;
}

bool FeatureVector::valid(double tol) const {
  const FeatureArray v = to_array();
  if (!v.allFinite()) return false;
  if (std::abs(hr_sin * hr_sin + hr_cos * hr_cos - 1.0) > tol) return false;
  if (std::abs(o_sin * o_sin + o_cos * o_cos - 1.0) > tol) return false;
  for (double d : {hr_dist, h_n, h_s, h_w, h_e, r_n, r_s, r_w, r_e}) {
    if (d < 0.0) return false;
  }
  return a > 0.0;
}

const std::array<const char*, kFeatureCount>& feature_names() {
  static const std::array<const char*, kFeatureCount> names{
      "hr_dist", "hr_sin", "hr_cos", "o_sin", "o_cos", "h_n", "h_s",
      "h_w",     "h_e",    "r_n",    "r_s",   "r_w",   "r_e", "a"};
  return names;
}

FeatureVector extract_features(const RoomPolygon& room, const Pose2D& human, const Pose2D& robot) {
  const Point2 offset = robot.position() - human.position();
  const double dist = offset.norm();
  if (dist < kCoincidentEps) throw DegenerateScenario("human and robot positions coincide");

  const CardinalDistances h = boundary_distances(human.position(), room);
  const CardinalDistances r = boundary_distances(robot.position(), room);

  const double bearing = normalize_angle(std::atan2(offset.y(), offset.x()) - human.heading);
  const double rel = normalize_angle(robot.heading - human.heading);

  FeatureVector f;
  f.hr_dist = dist;
  f.hr_sin = std::sin(bearing);
  f.hr_cos = std::cos(bearing);
  f.o_sin = std::sin(rel);
  f.o_cos = std::cos(rel);
  f.h_n = h.n;
  f.h_s = h.s;
  f.h_w = h.w;
  f.h_e = h.e;
  f.r_n = r.n;
  f.r_s = r.s;
  f.r_w = r.w;
  f.r_e = r.e;
  f.a = room.area();
  return f;
}

}  // namespace proxilab
