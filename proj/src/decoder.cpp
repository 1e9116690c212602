#include "tactwin/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tactwin/errors.hpp"
#include "tactwin/raster_ops.hpp"

namespace tactwin {

void DecoderParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("decoder.") + name + " must be positive");
    }
  };
  if (!(smoothing_sigma_px >= 0.0)) throw ConfigError("decoder.smoothing_sigma_px must be >= 0");
  positive(min_threshold, "min_threshold");
  if (!(noise_sigma >= 0.0)) throw ConfigError("decoder.noise_sigma must be >= 0");
  positive(noise_factor, "noise_factor");
  positive(min_area, "min_area");
  if (!(merge_gap >= 0.0)) throw ConfigError("decoder.merge_gap must be >= 0");
  positive(profile_bin, "profile_bin");
  positive(profile_radius, "profile_radius");
  if (canonical_size < 8) throw ConfigError("decoder.canonical_size must be >= 8");
  positive(canonical_scale, "canonical_scale");
  if (!(isotropy_threshold >= 0.0 && isotropy_threshold < 1.0)) {
    throw ConfigError("decoder.isotropy_threshold must be in [0, 1)");
  }
  if (!(box_lo_quantile >= 0.0 && box_lo_quantile < box_hi_quantile && box_hi_quantile <= 1.0)) {
    throw ConfigError("decoder box quantiles must satisfy 0 <= lo < hi <= 1");
  }
}

double DecoderParams::threshold() const {
  return std::max(min_threshold, noise_factor * noise_sigma * kernel_l2_norm(smoothing_sigma_px));
}

DeviationMap difference_image(const TactileImage& img, const TactileImage& reference) {
  if (!img.same_shape(reference)) throw ContractViolation("image and reference differ in shape");
  if (!reference.is_reference) throw ContractViolation("second image is not a reference frame");
  DeviationMap dev(img.width, img.height, img.scale);
  for (std::size_t i = 0; i < img.size(); ++i) dev.data[i] = img.data[i] - reference.data[i];
  return dev;
}

DeviationMap prepare_deviation(const TactileImage& img, const TactileImage& reference,
                               const DecoderParams& params) {
  return gaussian_blur(difference_image(img, reference), params.smoothing_sigma_px);
}

namespace {

Raster<std::uint8_t> threshold_mask(const DeviationMap& dev, double threshold) {
  Raster<std::uint8_t> mask(dev.width, dev.height, dev.scale, 0);
  for (std::size_t i = 0; i < dev.size(); ++i) mask.data[i] = std::abs(dev.data[i]) >= threshold;
  return mask;
}

int group_mask(const Raster<std::uint8_t>& mask, double merge_gap, Raster<int>& labels) {
  const int k = static_cast<int>(std::lround(merge_gap / (2.0 * mask.scale)));
  return label_components(fill_holes(dilate_square(mask, k)), labels);
}

}  // namespace

Raster<int> blob_groups(const DeviationMap& dev, double threshold, double merge_gap) {
  Raster<int> labels;
  group_mask(threshold_mask(dev, threshold), merge_gap, labels);
  return labels;
}

std::vector<Blob> extract_blobs(const DeviationMap& dev, double threshold, double min_area,
                                double merge_gap) {
  if (!(threshold > 0.0)) throw ContractViolation("blob threshold must be positive");
  const Raster<std::uint8_t> mask = threshold_mask(dev, threshold);
  Raster<int> labels;
  const int n = group_mask(mask, merge_gap, labels);
  std::vector<Blob> blobs(n);
  std::vector<std::size_t> filled(n, 0);
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const int g = labels.data[i];
    if (g == 0) continue;
    ++filled[g - 1];
    if (mask.data[i]) blobs[g - 1].pixels.push_back(i);
  }
  const double px_area = dev.scale * dev.scale;
  std::vector<Blob> out;
  for (int g = 0; g < n; ++g) {
    Blob& b = blobs[g];
    b.group = g + 1;
    b.area = static_cast<double>(b.pixels.size()) * px_area;
    b.filled_area = static_cast<double>(filled[g]) * px_area;
    if (b.pixels.empty() || b.area < min_area) continue;
    double wsum = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t i : b.pixels) {
      const double w = std::abs(dev.data[i]);
      const Vec2 p = dev.pixel_center(static_cast<int>(i / dev.width), static_cast<int>(i % dev.width));
      wsum += w;
      sx += w * p.x;
      sy += w * p.y;
      b.peak_dev = std::max(b.peak_dev, w);
    }
    b.centroid = {sx / wsum, sy / wsum};
    b.mass = wsum * px_area;
    b.mean_dev = wsum / static_cast<double>(b.pixels.size());
    for (std::size_t i : b.pixels) {
      const int r = static_cast<int>(i / dev.width), c = static_cast<int>(i % dev.width);
      const double w = std::abs(dev.data[i]);
      const Vec2 d = dev.pixel_center(r, c) - b.centroid;
      b.mu20 += w * d.x * d.x;
      b.mu02 += w * d.y * d.y;
      b.mu11 += w * d.x * d.y;
      const bool edge = r == 0 || c == 0 || r == dev.height - 1 || c == dev.width - 1 ||
                        labels.at(r - 1, c) != b.group || labels.at(r + 1, c) != b.group ||
                        labels.at(r, c - 1) != b.group || labels.at(r, c + 1) != b.group;
      if (edge) b.edge_contrast = std::max(b.edge_contrast, w);
    }
    b.mu20 /= wsum;
    b.mu02 /= wsum;
    b.mu11 /= wsum;
    out.push_back(std::move(b));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Blob& a, const Blob& b) { return a.mass > b.mass; });
  return out;
}

PoseEstimate estimate_pose(const Blob& blob, double isotropy_threshold) {
  const double trace = blob.mu20 + blob.mu02;
  if (!(trace > 0.0) || !std::isfinite(trace)) throw DecodeError("degenerate blob moments");
  PoseEstimate pose;
  const double diff = blob.mu20 - blob.mu02;
  pose.eccentricity = std::sqrt(diff * diff + 4.0 * blob.mu11 * blob.mu11) / trace;
  const double phi = 0.5 * std::atan2(2.0 * blob.mu11, diff) * 180.0 / std::numbers::pi;
  pose.principal_angle = normalize_angle(phi).value();
  if (pose.eccentricity < isotropy_threshold) {
    pose.low_confidence = true;
    pose.theta = AngleDeg(0.0);
  } else {
    pose.theta = AngleDeg(pose.principal_angle);
  }
  return pose;
}

std::vector<double> radial_profile(const DeviationMap& dev, const Raster<int>& labels,
                                   const Blob& blob, const DecoderParams& params) {
  const int nbins = static_cast<int>(std::ceil(params.profile_radius / params.profile_bin));
  std::vector<double> sum(nbins, 0.0), count(nbins, 0.0);
  const double reach = params.profile_radius;
  const int c0 = std::max(0, static_cast<int>(dev.to_pixel({blob.centroid.x - reach, 0}).x));
  const int c1 = std::min(dev.width, static_cast<int>(dev.to_pixel({blob.centroid.x + reach, 0}).x) + 2);
  const int r0 = std::max(0, static_cast<int>(dev.to_pixel({0, blob.centroid.y - reach}).y));
  const int r1 = std::min(dev.height, static_cast<int>(dev.to_pixel({0, blob.centroid.y + reach}).y) + 2);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const int g = labels.at(r, c);
      if (g != 0 && g != blob.group) continue;
      const double d = norm(dev.pixel_center(r, c) - blob.centroid);
      const int k = static_cast<int>(d / params.profile_bin);
      if (k >= nbins) continue;
      sum[k] += std::abs(dev.at(r, c));
      count[k] += 1.0;
    }
  }
  for (int k = 0; k < nbins; ++k) sum[k] = count[k] > 0.0 ? sum[k] / count[k] : 0.0;
  return sum;
}

double CoarseMask::sample(Vec2 mm) const {
  // Fine pixel coordinate, then coarse cell coordinate of the block average.
  const double fx = mm.x / fine_scale + fine_width / 2.0 - 0.5;
  const double fy = mm.y / fine_scale + fine_height / 2.0 - 0.5;
  const double cx = (fx + 0.5) / factor - 0.5;
  const double cy = (fy + 0.5) / factor - 0.5;
  const int x0 = static_cast<int>(std::floor(cx));
  const int y0 = static_cast<int>(std::floor(cy));
  const double tx = cx - x0, ty = cy - y0;
  auto at = [&](int y, int x) {
    if (x < 0 || y < 0 || x >= coarse.width || y >= coarse.height) return 0.0;
    return coarse.at(y, x);
  };
  return (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
}

CoarseMask coarse_mask(const Blob& blob, int width, int height, double scale,
                       const DecoderParams& params) {
  CoarseMask m;
  m.factor = std::max(1, static_cast<int>(std::lround(params.canonical_scale / scale)));
  m.fine_width = width;
  m.fine_height = height;
  m.fine_scale = scale;
  const int cw = (width + m.factor - 1) / m.factor;
  const int ch = (height + m.factor - 1) / m.factor;
  m.coarse = Raster<double>(cw, ch, scale * m.factor, 0.0);
  const double inv = 1.0 / (static_cast<double>(m.factor) * m.factor);
  for (std::size_t i : blob.pixels) {
    const int r = static_cast<int>(i / width), c = static_cast<int>(i % width);
    m.coarse.at(r / m.factor, c / m.factor) += inv;
  }
  return m;
}

CanonicalMask canonical_mask(const CoarseMask& src, Vec2 center, double rotation_deg,
                             const DecoderParams& params) {
  CanonicalMask out;
  out.size = params.canonical_size;
  out.scale = params.canonical_scale;
  out.cells.resize(static_cast<std::size_t>(out.size) * out.size);
  const double rad = rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  for (int r = 0; r < out.size; ++r) {
    for (int c = 0; c < out.size; ++c) {
      const double qx = (c + 0.5 - out.size / 2.0) * out.scale;
      const double qy = (r + 0.5 - out.size / 2.0) * out.scale;
      const Vec2 p{center.x + cs * qx - sn * qy, center.y + sn * qx + cs * qy};
      out.cells[static_cast<std::size_t>(r) * out.size + c] = src.sample(p);
    }
  }
  return out;
}

double mask_correlation(const CanonicalMask& a, const CanonicalMask& b) {
  if (a.cells.size() != b.cells.size()) throw ContractViolation("canonical mask size mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    ab += a.cells[i] * b.cells[i];
    aa += a.cells[i] * a.cells[i];
    bb += b.cells[i] * b.cells[i];
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), 0.0, 1.0);
}

ClassMatch match_template(const CoarseMask& src, Vec2 center, const ClassTemplate& tmpl,
                          const DecoderParams& params) {
  ClassMatch best{tmpl.class_name, -1.0, 0.0};
  auto consider = [&](double rot) {
    const double s = mask_correlation(canonical_mask(src, center, rot, params), tmpl.mask);
    if (s > best.score) {
      best.score = s;
      best.rotation = rot;
    }
  };
  for (int k = 0; k < 72; ++k) consider(5.0 * k);
  const double coarse = best.rotation;
  for (int k = -5; k <= 5; ++k) {
    if (k != 0) consider(coarse + 0.5 * k);
  }
  best.rotation = std::fmod(std::fmod(best.rotation, 360.0) + 360.0, 360.0);
  best.score = std::max(best.score, 0.0);
  return best;
}

ClassMatch classify(const CoarseMask& src, Vec2 center, const std::vector<ClassTemplate>& templates,
                    const DecoderParams& params) {
  if (templates.empty()) throw ContractViolation("classify needs at least one template");
  ClassMatch best;
  bool have = false;
  for (const ClassTemplate& t : templates) {
    const ClassMatch m = match_template(src, center, t, params);
    if (!have || m.score > best.score ||
        (m.score == best.score && m.class_name < best.class_name)) {
      best = m;
      have = true;
    }
  }
  return best;
}

}  // namespace tactwin
