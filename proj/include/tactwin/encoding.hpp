#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tactwin/geometry.hpp"

namespace tactwin {

inline constexpr int kCslBins = 180;

/// Circular smooth label: one bin per degree, bin i centred on i degrees.
struct CslVector {
  std::array<double, kCslBins> bins{};
};

/// Gaussian window of the circular smooth label. Neither value is fixed by
/// the sensing method itself, so both stay configurable.
struct CslParams {
  double window_radius = 6.0;  // degrees, in [1, 90)
  double sigma = 4.0;          // degrees, > 0

  void validate() const;
};

/// Circular distance between two bins on the 180-periodic circle.
int circular_bin_distance(int a, int b);

CslVector csl_encode(AngleDeg theta, const CslParams& params = {});

/// Argmax decode; ties go to the smallest bin. Throws DecodeError when no bin
/// is positive.
AngleDeg csl_decode(const CslVector& v);

struct GridCell {
  int level = 0;  // index into RegionGrid::strides
  int stride = 0;
  int row = 0;
  int col = 0;
  double center_x = 0.0;  // px
  double center_y = 0.0;  // px
};

/// Multi-scale anchor-free cell layout: one cell per feature-map location at
/// strides 8, 16 and 32, enumerated level-major then row-major.
struct RegionGrid {
  int input_size = 0;
  std::vector<int> strides;
  std::vector<GridCell> cells;

  std::size_t size() const { return cells.size(); }
};

RegionGrid build_region_grid(int input_size);

/// Cell centre in the physical frame: origin at the image centre, x along
/// columns, y along rows.
Vec2 cell_center_mm(const RegionGrid& grid, std::size_t index, double scale_mm_per_px);

}  // namespace tactwin
