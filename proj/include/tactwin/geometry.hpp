#pragma once

#include <array>
#include <vector>

namespace tactwin {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a);

/// Rotate `v` counter-clockwise by `degrees`.
Vec2 rotate(Vec2 v, double degrees);

/// Orientation angle in degrees on the half-open range [0, 180).
///
/// Box and pose angles are 180-degree periodic; every constructor path goes
/// through normalize_angle so a stored value is always canonical.
class AngleDeg {
 public:
  AngleDeg() = default;
  explicit AngleDeg(double raw);

  double value() const { return value_; }
  double radians() const;

  friend bool operator==(AngleDeg, AngleDeg) = default;

 private:
  double value_ = 0.0;
};

/// Reduce `raw` modulo 180 into [0, 180). Throws DomainError when not finite.
AngleDeg normalize_angle(double raw);

/// 2x2 rotation matrix, row-major.
struct Rotation2 {
  std::array<double, 4> m{1.0, 0.0, 0.0, 1.0};

  static Rotation2 from_degrees(double degrees);
  Rotation2 transposed() const;
  double trace() const { return m[0] + m[3]; }
  friend Rotation2 operator*(const Rotation2& a, const Rotation2& b);
};

/// Pose error between two 180-periodic orientations, in degrees on [0, 90].
///
/// Equals arccos(|tr(R_pred R_gt^T)| / 2), evaluated as the folded
/// difference min(d, 180 - d) so that it is exact for exact inputs.
double angle_error(AngleDeg pred, AngleDeg gt);

/// Five-parameter oriented rectangle in millimetres.
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
  AngleDeg theta;

  double area() const { return w * h; }
  Vec2 center() const { return {cx, cy}; }
  /// True when `p` lies inside or on the rectangle.
  bool contains(Vec2 p) const;
};

/// Builds a box, validating w > 0 and h > 0 (DomainError otherwise).
OrientedBox make_box(double cx, double cy, double w, double h, double theta_deg);

struct ConvexPolygon {
  std::vector<Vec2> vertices;  // counter-clockwise

  bool empty() const { return vertices.empty(); }
  std::size_t size() const { return vertices.size(); }
};

ConvexPolygon box_to_polygon(const OrientedBox& b);

/// Sutherland-Hodgman clip of `subject` against the convex `clip` polygon.
/// Vertices closer than 1e-9 mm are merged; fully degenerate output is empty.
ConvexPolygon polygon_clip(const ConvexPolygon& subject, const ConvexPolygon& clip);

/// Shoelace area; non-negative for CCW input.
double polygon_area(const ConvexPolygon& p);

double rotated_iou(const OrientedBox& a, const OrientedBox& b);

}  // namespace tactwin
