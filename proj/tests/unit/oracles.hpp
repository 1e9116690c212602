#pragma once

#include <cmath>
#include <random>

#include "tactwin/geometry.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline bool inside(const tactwin::OrientedBox& b, double x, double y) {
  const double t = b.theta.value() * kPi / 180.0;
  const double dx = x - b.cx, dy = y - b.cy;
  const double u = std::cos(t) * dx + std::sin(t) * dy;
  const double v = -std::sin(t) * dx + std::cos(t) * dy;
  return std::abs(u) <= b.w / 2.0 && std::abs(v) <= b.h / 2.0;
}

/// IoU by uniform sampling of the joint bounding square.
inline double monte_carlo_iou(const tactwin::OrientedBox& a, const tactwin::OrientedBox& b, int n,
                              std::mt19937_64& rng) {
  const double ra = std::hypot(a.w, a.h) / 2.0, rb = std::hypot(b.w, b.h) / 2.0;
  const double x0 = std::min(a.cx - ra, b.cx - rb), x1 = std::max(a.cx + ra, b.cx + rb);
  const double y0 = std::min(a.cy - ra, b.cy - rb), y1 = std::max(a.cy + ra, b.cy + rb);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  long in_a = 0, in_b = 0, both = 0;
  for (int i = 0; i < n; ++i) {
    const double x = ux(rng), y = uy(rng);
    const bool pa = inside(a, x, y), pb = inside(b, x, y);
    in_a += pa;
    in_b += pb;
    both += pa && pb;
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

/// Smallest difference of two axis angles modulo 180.
inline double axis_angle_difference(double a, double b) {
  double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

}  // namespace oracle
