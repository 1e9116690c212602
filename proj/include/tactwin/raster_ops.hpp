#pragma once

#include <cstdint>
#include <vector>

#include "tactwin/image.hpp"

namespace tactwin {

/// Separable Gaussian blur with clamped borders. sigma_px <= 0 returns a copy.
Raster<double> gaussian_blur(const Raster<double>& in, double sigma_px);

/// L2 norm of the normalised 2-D Gaussian kernel used by gaussian_blur; white
/// noise of std s has std s * kernel_l2_norm(sigma) after blurring.
double kernel_l2_norm(double sigma_px);

/// Binary dilation by a (2k+1) x (2k+1) square.
Raster<std::uint8_t> dilate_square(const Raster<std::uint8_t>& mask, int k);

/// Sets every background pixel not 4-connected to the raster border.
Raster<std::uint8_t> fill_holes(const Raster<std::uint8_t>& mask);

/// 8-connected component labels (0 = background, 1..n). Returns n.
int label_components(const Raster<std::uint8_t>& mask, Raster<int>& labels);

}  // namespace tactwin
