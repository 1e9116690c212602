#include "tactwin/encoding.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "tactwin/errors.hpp"

namespace tactwin {

void CslParams::validate() const {
  if (!(window_radius >= 1.0 && window_radius < 90.0)) {
    throw ConfigError("csl window_radius must lie in [1, 90), got " + std::to_string(window_radius));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("csl sigma must be positive, got " + std::to_string(sigma));
  }
}

int circular_bin_distance(int a, int b) {
  const int d = std::abs(a - b) % kCslBins;
  return std::min(d, kCslBins - d);
}

CslVector csl_encode(AngleDeg theta, const CslParams& params) {
  params.validate();
  const int peak = static_cast<int>(std::lround(theta.value())) % kCslBins;
  CslVector v;
  const double denom = 2.0 * params.sigma * params.sigma;
  for (int j = 0; j < kCslBins; ++j) {
    const int d = circular_bin_distance(j, peak);
    if (d <= params.window_radius) v.bins[j] = std::exp(-static_cast<double>(d * d) / denom);
  }
  return v;
}

AngleDeg csl_decode(const CslVector& v) {
  int best = -1;
  double best_value = 0.0;
  for (int j = 0; j < kCslBins; ++j) {
    const double b = v.bins[j];
    if (!std::isfinite(b)) throw DecodeError("csl bin " + std::to_string(j) + " is not finite");
    if (b > best_value) {
      best_value = b;
      best = j;
    }
  }
  if (best < 0) throw DecodeError("csl vector has no positive bin");
  return AngleDeg(static_cast<double>(best));
}

RegionGrid build_region_grid(int input_size) {
  RegionGrid grid;
  grid.input_size = input_size;
  grid.strides = {8, 16, 32};
  if (input_size <= 0 || input_size % 32 != 0) {
    throw ConfigError("grid input size must be a positive multiple of 32, got " +
                      std::to_string(input_size));
  }
  std::size_t total = 0;
  for (int s : grid.strides) total += static_cast<std::size_t>(input_size / s) * (input_size / s);
  grid.cells.reserve(total);
  for (int level = 0; level < static_cast<int>(grid.strides.size()); ++level) {
    const int stride = grid.strides[level];
    const int n = input_size / stride;
    for (int row = 0; row < n; ++row) {
      for (int col = 0; col < n; ++col) {
        grid.cells.push_back(GridCell{level, stride, row, col, (col + 0.5) * stride,
                                      (row + 0.5) * stride});
      }
    }
  }
  return grid;
}

Vec2 cell_center_mm(const RegionGrid& grid, std::size_t index, double scale_mm_per_px) {
  if (index >= grid.cells.size()) {
    throw ContractViolation("cell index " + std::to_string(index) + " out of range");
  }
  if (!(scale_mm_per_px > 0.0)) throw ConfigError("scale must be positive");
  const GridCell& c = grid.cells[index];
  const double half = grid.input_size * scale_mm_per_px / 2.0;
  return {c.center_x * scale_mm_per_px - half, c.center_y * scale_mm_per_px - half};
}

}  // namespace tactwin
