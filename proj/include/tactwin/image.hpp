#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "tactwin/geometry.hpp"

namespace tactwin {

/// Square-pixel raster in the sensor frame. Row r, column c covers the pixel
/// centred at x = (c + 0.5 - width/2) * scale, y = (r + 0.5 - height/2) * scale.
template <class T>
struct Raster {
  int width = 0;
  int height = 0;
  double scale = 0.05;  // mm per px
  std::vector<T> data;

  Raster() = default;
  Raster(int w, int h, double s, T fill = T{})
      : width(w), height(h), scale(s), data(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width + col;
  }
  T& at(int row, int col) { return data[index(row, col)]; }
  const T& at(int row, int col) const { return data[index(row, col)]; }

  Vec2 pixel_center(int row, int col) const {
    return {(col + 0.5 - width / 2.0) * scale, (row + 0.5 - height / 2.0) * scale};
  }
  /// Continuous pixel coordinates (col, row) of a physical point.
  Vec2 to_pixel(Vec2 mm) const {
    return {mm.x / scale + width / 2.0 - 0.5, mm.y / scale + height / 2.0 - 0.5};
  }
  bool same_shape(const Raster& o) const {
    return width == o.width && height == o.height && scale == o.scale;
  }
};

/// Membrane displacement z = f(x, y) in mm, positive into the sensor.
struct HeightField : Raster<double> {
  using Raster<double>::Raster;
};

/// Rendered reflection intensity in [0, 1].
struct TactileImage : Raster<double> {
  using Raster<double>::Raster;
  bool is_reference = false;
};

/// Writes a binary P5 PGM with 16-bit big-endian samples (maxval 65535).
/// Rows are written from +y down so the physical +y axis points up in viewers.
void write_pgm16(const std::filesystem::path& path, const TactileImage& image);

TactileImage read_pgm16(const std::filesystem::path& path, double scale_mm_per_px,
                        bool is_reference = false);

}  // namespace tactwin
