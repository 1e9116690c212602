#include "tactwin/raster_ops.hpp"

#include <algorithm>
#include <cmath>

namespace tactwin {
namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

Raster<double> gaussian_blur(const Raster<double>& in, double sigma_px) {
  if (sigma_px <= 0.0) return in;
  const std::vector<double> k = gaussian_kernel(sigma_px);
  const int radius = static_cast<int>(k.size() / 2);
  Raster<double> tmp(in.width, in.height, in.scale);
  Raster<double> out(in.width, in.height, in.scale);
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * in.at(r, std::clamp(c + i, 0, in.width - 1));
      }
      tmp.at(r, c) = acc;
    }
  }
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp.at(std::clamp(r + i, 0, in.height - 1), c);
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

double kernel_l2_norm(double sigma_px) {
  if (sigma_px <= 0.0) return 1.0;
  const std::vector<double> k = gaussian_kernel(sigma_px);
  double s1 = 0.0;
  for (double v : k) s1 += v * v;
  // Separable kernel: the 2-D sum of squares is the square of the 1-D sum.
  return std::sqrt(s1 * s1);
}

Raster<std::uint8_t> dilate_square(const Raster<std::uint8_t>& mask, int k) {
  if (k <= 0) return mask;
  const int w = mask.width, h = mask.height;
  Raster<std::uint8_t> tmp(w, h, mask.scale, 0), out(w, h, mask.scale, 0);
  std::vector<int> prefix(std::max(w, h) + 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) prefix[c + 1] = prefix[c] + mask.at(r, c);
    for (int c = 0; c < w; ++c) {
      tmp.at(r, c) = prefix[std::min(w, c + k + 1)] - prefix[std::max(0, c - k)] > 0;
    }
  }
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) prefix[r + 1] = prefix[r] + tmp.at(r, c);
    for (int r = 0; r < h; ++r) {
      out.at(r, c) = prefix[std::min(h, r + k + 1)] - prefix[std::max(0, r - k)] > 0;
    }
  }
  return out;
}

Raster<std::uint8_t> fill_holes(const Raster<std::uint8_t>& mask) {
  const int w = mask.width, h = mask.height;
  Raster<std::uint8_t> outside(w, h, mask.scale, 0);
  std::vector<std::size_t> stack;
  auto seed = [&](int r, int c) {
    const std::size_t i = mask.index(r, c);
    if (!mask.data[i] && !outside.data[i]) {
      outside.data[i] = 1;
      stack.push_back(i);
    }
  };
  for (int c = 0; c < w; ++c) {
    seed(0, c);
    seed(h - 1, c);
  }
  for (int r = 0; r < h; ++r) {
    seed(r, 0);
    seed(r, w - 1);
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int r = static_cast<int>(i / w), c = static_cast<int>(i % w);
    if (r > 0) seed(r - 1, c);
    if (r + 1 < h) seed(r + 1, c);
    if (c > 0) seed(r, c - 1);
    if (c + 1 < w) seed(r, c + 1);
  }
  Raster<std::uint8_t> filled(w, h, mask.scale, 0);
  for (std::size_t i = 0; i < filled.size(); ++i) filled.data[i] = outside.data[i] ? 0 : 1;
  return filled;
}

int label_components(const Raster<std::uint8_t>& mask, Raster<int>& labels) {
  const int w = mask.width, h = mask.height;
  labels = Raster<int>(w, h, mask.scale, 0);
  int next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.data[start] || labels.data[start]) continue;
    ++next;
    labels.data[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int r = static_cast<int>(i / w), c = static_cast<int>(i % w);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const std::size_t j = mask.index(rr, cc);
          if (mask.data[j] && !labels.data[j]) {
            labels.data[j] = next;
            stack.push_back(j);
          }
        }
      }
    }
  }
  return next;
}

}  // namespace tactwin
