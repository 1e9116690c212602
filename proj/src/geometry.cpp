#include "tactwin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tactwin/errors.hpp"

namespace tactwin {
namespace {

constexpr double kMergeTol = 1e-9;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Signed side of p relative to the directed edge a->b (positive = left).
double side(Vec2 a, Vec2 b, Vec2 p) { return cross(b - a, p - a); }

Vec2 intersect(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
  const double sp = side(a, b, p);
  const double sq = side(a, b, q);
  const double t = sp / (sp - sq);
  return p + t * (q - p);
}

void merge_close(std::vector<Vec2>& v) {
  std::vector<Vec2> out;
  out.reserve(v.size());
  for (const Vec2& p : v) {
    if (out.empty() || norm(p - out.back()) > kMergeTol) out.push_back(p);
  }
  while (out.size() > 1 && norm(out.front() - out.back()) <= kMergeTol) out.pop_back();
  v = std::move(out);
}

}  // namespace

double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Vec2 rotate(Vec2 v, double degrees) {
  const double c = std::cos(deg2rad(degrees));
  const double s = std::sin(deg2rad(degrees));
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

AngleDeg normalize_angle(double raw) { return AngleDeg(raw); }

AngleDeg::AngleDeg(double raw) {
  if (!std::isfinite(raw)) throw DomainError("angle must be finite");
  double v = std::fmod(raw, 180.0);
  if (v < 0.0) v += 180.0;
  // fmod of a tiny negative number can round up to exactly 180.
  if (v >= 180.0) v = 0.0;
  value_ = v;
}

double AngleDeg::radians() const { return deg2rad(value_); }

Rotation2 Rotation2::from_degrees(double degrees) {
  const double c = std::cos(deg2rad(degrees));
  const double s = std::sin(deg2rad(degrees));
  return Rotation2{{c, -s, s, c}};
}

Rotation2 Rotation2::transposed() const { return Rotation2{{m[0], m[2], m[1], m[3]}}; }

Rotation2 operator*(const Rotation2& a, const Rotation2& b) {
  return Rotation2{{a.m[0] * b.m[0] + a.m[1] * b.m[2], a.m[0] * b.m[1] + a.m[1] * b.m[3],
                    a.m[2] * b.m[0] + a.m[3] * b.m[2], a.m[2] * b.m[1] + a.m[3] * b.m[3]}};
}

double angle_error(AngleDeg pred, AngleDeg gt) {
  // arccos(|tr(R_pred R_gt^T)| / 2), folded exactly
  const double d = std::abs(pred.value() - gt.value());
  return std::min(d, 180.0 - d);
}

bool OrientedBox::contains(Vec2 p) const {
  const Vec2 local = rotate(p - center(), -theta.value());
  constexpr double tol = 1e-12;
  return std::abs(local.x) <= w / 2.0 + tol && std::abs(local.y) <= h / 2.0 + tol;
}

OrientedBox make_box(double cx, double cy, double w, double h, double theta_deg) {
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw DomainError("box center must be finite");
  if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(w) || !std::isfinite(h)) {
    throw DomainError("box width and height must be positive");
  }
  return OrientedBox{cx, cy, w, h, AngleDeg(theta_deg)};
}

ConvexPolygon box_to_polygon(const OrientedBox& b) {
  const double hw = b.w / 2.0;
  const double hh = b.h / 2.0;
  const std::array<Vec2, 4> local{{{hw, hh}, {-hw, hh}, {-hw, -hh}, {hw, -hh}}};
  ConvexPolygon poly;
  poly.vertices.reserve(4);
  for (const Vec2& v : local) poly.vertices.push_back(b.center() + rotate(v, b.theta.value()));
  return poly;
}

ConvexPolygon polygon_clip(const ConvexPolygon& subject, const ConvexPolygon& clip) {
  std::vector<Vec2> output = subject.vertices;
  const std::size_t n = clip.vertices.size();
  for (std::size_t i = 0; i < n && !output.empty(); ++i) {
    const Vec2 a = clip.vertices[i];
    const Vec2 b = clip.vertices[(i + 1) % n];
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Vec2 cur = input[j];
      const Vec2 prev = input[(j + input.size() - 1) % input.size()];
      const bool cur_in = side(a, b, cur) >= 0.0;
      const bool prev_in = side(a, b, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) output.push_back(intersect(prev, cur, a, b));
        output.push_back(cur);
      } else if (prev_in) {
        output.push_back(intersect(prev, cur, a, b));
      }
    }
    merge_close(output);
  }
  if (output.size() < 3) output.clear();
  return ConvexPolygon{std::move(output)};
}

double polygon_area(const ConvexPolygon& p) {
  const std::size_t n = p.vertices.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) twice += cross(p.vertices[i], p.vertices[(i + 1) % n]);
  return std::max(0.0, twice / 2.0);
}

double rotated_iou(const OrientedBox& a, const OrientedBox& b) {
  const double inter = polygon_area(polygon_clip(box_to_polygon(a), box_to_polygon(b)));
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace tactwin
