#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace proxilab {

using Point2 = Eigen::Vector2d;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

/// Planar pose. Heading is counter-clockwise from +x and kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double heading_);

  Point2 position() const { return {x, y}; }
};

/// Simple closed polygon, stored counter-clockwise.
///
/// Construction rejects fewer than three distinct vertices, zero area, and
/// self-intersecting outlines (std::invalid_argument). A repeated closing
/// vertex is dropped.
class RoomPolygon {
 public:
  explicit RoomPolygon(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double area() const { return area_; }

  /// True when the point lies strictly inside (boundary points are outside).
  bool contains(const Point2& p) const;
  bool on_boundary(const Point2& p, double tol = 1e-9) const;

  Point2 min_corner() const;
  Point2 max_corner() const;

  /// Returns a copy rigidly moved by rotation `angle` about `pivot`, then `offset`.
  RoomPolygon transformed(double angle, const Point2& pivot, const Point2& offset) const;

 private:
  std::vector<Point2> vertices_;
  double area_ = 0.0;
};

RoomPolygon make_rectangle(double x0, double y0, double x1, double y1);

double polygon_area(const RoomPolygon& room);

struct CardinalDistances {
  double n = 0.0;  // +y
  double s = 0.0;  // -y
  double w = 0.0;  // -x
  double e = 0.0;  // +x
};

/// Distance to the first wall hit along +y, -y, -x, +x. Throws OutsideRoom
/// unless the point is strictly inside.
CardinalDistances boundary_distances(const Point2& point, const RoomPolygon& room);

/// Nearest wall hit along an arbitrary unit direction, or +inf if none.
double ray_to_wall(const Point2& origin, const Point2& direction, const RoomPolygon& room);

inline constexpr double kCoincidentEps = 1e-6;
inline constexpr int kFeatureCount = 14;

using FeatureArray = Eigen::Matrix<double, kFeatureCount, 1>;

/// The 14-value scenario encoding, in fixed order.
struct FeatureVector {
  double hr_dist = 0.0;
  double hr_sin = 0.0;
  double hr_cos = 1.0;
  double o_sin = 0.0;
  double o_cos = 1.0;
  double h_n = 0.0, h_s = 0.0, h_w = 0.0, h_e = 0.0;
  double r_n = 0.0, r_s = 0.0, r_w = 0.0, r_e = 0.0;
  double a = 0.0;

  FeatureArray to_array() const;
  static FeatureVector from_array(const FeatureArray& v);
  static FeatureVector from_span(std::span<const double> v);

  /// Checks the unit-circle and sign invariants.
  bool valid(double tol = 1e-9) const;

  bool operator==(const FeatureVector&) const = default;
};

/// Feature names in encoding order.
const std::array<const char*, kFeatureCount>& feature_names();

/// Encodes (room, human, robot). The bearing is measured in the human's body
/// frame (0 = straight ahead, positive to the human's left); the relative
/// orientation is robot.heading - human.heading.
FeatureVector extract_features(const RoomPolygon& room, const Pose2D& human, const Pose2D& robot);

}  // namespace proxilab
