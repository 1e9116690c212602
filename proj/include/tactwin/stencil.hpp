#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tactwin/geometry.hpp"
#include "tactwin/image.hpp"

namespace tactwin {

struct Disc {
  double radius = 1.0;
};

struct Ring {
  double inner = 0.5;
  double outer = 1.0;
};

/// Convex polygon piece, counter-clockwise, in the stencil's local frame.
struct ConvexPiece {
  std::vector<Vec2> vertices;
};

using StencilPart = std::variant<Disc, Ring, ConvexPiece>;

/// Rigid contact footprint described as a union of non-overlapping primitives
/// in a local frame whose tight bounding box is centred on the origin.
///
/// The analytic description gives exact inside tests and exact distances to
/// the footprint from outside, which the height field needs; rasterize()
/// produces the binary-mask form for a given pixel scale.
class Stencil {
 public:
  Stencil() = default;
  Stencil(std::string name, std::vector<StencilPart> parts);

  const std::string& name() const { return name_; }
  const std::vector<StencilPart>& parts() const { return parts_; }

  bool contains(Vec2 local) const;
  /// Euclidean distance from `local` to the footprint; 0 inside.
  double outside_distance(Vec2 local) const;
  double area() const { return area_; }
  /// Tight bounding-box size in the local frame.
  double width() const { return width_; }
  double height() const { return height_; }
  /// Radius of the smallest origin-centred disc containing the footprint.
  double reach() const { return reach_; }

  Raster<std::uint8_t> rasterize(double scale_mm_per_px) const;

  static Stencil rectangle(std::string name, double w, double h);
  static Stencil circle(std::string name, double diameter);

 private:
  std::string name_;
  std::vector<StencilPart> parts_;
  double area_ = 0.0;
  double width_ = 0.0;
  double height_ = 0.0;
  double reach_ = 0.0;
};

/// The six reference footprints: circle, strip, hexagon, cross, annulus and
/// l_shape, sorted by name.
std::vector<Stencil> footprint_library();

/// Four screw contact parts (head, body, top, bottom), each a renamed
/// footprint from the library.
std::vector<Stencil> screw_part_library();

/// Looks up a stencil by name in both libraries. Throws ConfigError.
Stencil find_stencil(const std::string& name);

}  // namespace tactwin
