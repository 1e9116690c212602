#include "tactwin/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tactwin/errors.hpp"

namespace tactwin {
namespace {

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

bool piece_contains(const ConvexPiece& piece, Vec2 p) {
  const auto& v = piece.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (cross(v[(i + 1) % v.size()] - v[i], p - v[i]) < 0.0) return false;
  }
  return true;
}

double piece_distance(const ConvexPiece& piece, Vec2 p) {
  if (piece_contains(piece, p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  const auto& v = piece.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    best = std::min(best, segment_distance(p, v[i], v[(i + 1) % v.size()]));
  }
  return best;
}

ConvexPiece rect_piece(double x0, double y0, double x1, double y1) {
  return ConvexPiece{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();
  double reach = 0.0;

  void add(Vec2 p) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
    reach = std::max(reach, norm(p));
  }
  void add_disc(double r) {
    add({-r, 0.0});
    add({r, 0.0});
    add({0.0, -r});
    add({0.0, r});
  }
};

}  // namespace

Stencil::Stencil(std::string name, std::vector<StencilPart> parts)
    : name_(std::move(name)), parts_(std::move(parts)) {
  if (parts_.empty()) throw ConfigError("stencil '" + name_ + "' has no parts");
  Bounds bounds;
  for (const auto& part : parts_) {
    if (const auto* d = std::get_if<Disc>(&part)) {
      if (!(d->radius > 0.0)) throw ConfigError("stencil disc radius must be positive");
      area_ += std::numbers::pi * d->radius * d->radius;
      bounds.add_disc(d->radius);
    } else if (const auto* r = std::get_if<Ring>(&part)) {
      if (!(r->inner >= 0.0 && r->outer > r->inner)) {
        throw ConfigError("stencil ring needs 0 <= inner < outer");
      }
      area_ += std::numbers::pi * (r->outer * r->outer - r->inner * r->inner);
      bounds.add_disc(r->outer);
    } else {
      const auto& piece = std::get<ConvexPiece>(part);
      if (piece.vertices.size() < 3) throw ConfigError("stencil polygon needs 3+ vertices");
      ConvexPolygon poly{piece.vertices};
      const double a = polygon_area(poly);
      if (!(a > 0.0)) throw ConfigError("stencil polygon must be counter-clockwise");
      area_ += a;
      for (const Vec2& v : piece.vertices) bounds.add(v);
    }
  }
  width_ = bounds.x1 - bounds.x0;
  height_ = bounds.y1 - bounds.y0;
  reach_ = bounds.reach;
  if (std::abs(bounds.x0 + bounds.x1) > 1e-9 || std::abs(bounds.y0 + bounds.y1) > 1e-9) {
    throw ConfigError("stencil '" + name_ + "' bounding box must be centred on the origin");
  }
}

bool Stencil::contains(Vec2 local) const { return outside_distance(local) == 0.0; }

double Stencil::outside_distance(Vec2 local) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& part : parts_) {
    double d = 0.0;
    if (const auto* disc = std::get_if<Disc>(&part)) {
      d = std::max(0.0, norm(local) - disc->radius);
    } else if (const auto* ring = std::get_if<Ring>(&part)) {
      const double r = norm(local);
      d = r < ring->inner ? ring->inner - r : std::max(0.0, r - ring->outer);
    } else {
      d = piece_distance(std::get<ConvexPiece>(part), local);
    }
    best = std::min(best, d);
    if (best == 0.0) break;
  }
  return best;
}

Raster<std::uint8_t> Stencil::rasterize(double scale) const {
  if (!(scale > 0.0)) throw ConfigError("stencil raster scale must be positive");
  const int w = static_cast<int>(std::ceil(width_ / scale)) + 2;
  const int h = static_cast<int>(std::ceil(height_ / scale)) + 2;
  Raster<std::uint8_t> mask(w, h, scale, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) mask.at(r, c) = contains(mask.pixel_center(r, c)) ? 1 : 0;
  }
  return mask;
}

Stencil Stencil::rectangle(std::string name, double w, double h) {
  if (!(w > 0.0 && h > 0.0)) throw ConfigError("rectangle dimensions must be positive");
  return Stencil(std::move(name), {rect_piece(-w / 2, -h / 2, w / 2, h / 2)});
}

Stencil Stencil::circle(std::string name, double diameter) {
  if (!(diameter > 0.0)) throw ConfigError("circle diameter must be positive");
  return Stencil(std::move(name), {Disc{diameter / 2.0}});
}

namespace {

Stencil hexagon(std::string name, double circumradius) {
  ConvexPiece piece;
  for (int k = 0; k < 6; ++k) {
    const double a = std::numbers::pi / 3.0 * k;
    piece.vertices.push_back({circumradius * std::cos(a), circumradius * std::sin(a)});
  }
  return Stencil(std::move(name), {piece});
}

// Asymmetric plus sign: long bar along x, shorter arms along y.
Stencil cross_shape(std::string name, double long_arm, double short_arm, double bar) {
  const double hb = bar / 2.0;
  return Stencil(std::move(name), {rect_piece(-long_arm / 2, -hb, long_arm / 2, hb),
                                   rect_piece(-hb, hb, hb, short_arm / 2),
                                   rect_piece(-hb, -short_arm / 2, hb, -hb)});
}

Stencil l_shape(std::string name, double w, double h, double bar) {
  const double x0 = -w / 2, x1 = w / 2, y0 = -h / 2, y1 = h / 2;
  return Stencil(std::move(name),
                 {rect_piece(x0, y0, x1, y0 + bar), rect_piece(x0, y0 + bar, x0 + bar, y1)});
}

}  // namespace

std::vector<Stencil> footprint_library() {
  return {
      Stencil(std::string("annulus"), {Ring{3.5, 6.0}}),
      Stencil::circle("circle", 12.0),
      cross_shape("cross", 16.0, 10.0, 4.0),
      hexagon("hexagon", 6.0),
      l_shape("l_shape", 14.0, 10.0, 4.0),
      Stencil::rectangle("strip", 20.0, 4.0),
  };
}

std::vector<Stencil> screw_part_library() {
  return {
      Stencil::rectangle("body", 18.0, 5.0),
      hexagon("bottom", 5.0),
      Stencil::circle("head", 12.0),
      cross_shape("top", 12.0, 8.0, 3.0),
  };
}

Stencil find_stencil(const std::string& name) {
  for (auto lib : {footprint_library(), screw_part_library()}) {
    for (auto& s : lib) {
      if (s.name() == name) return s;
    }
  }
  throw ConfigError("unknown footprint '" + name + "'");
}

}  // namespace tactwin
