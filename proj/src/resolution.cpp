#include "tactwin/resolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tactwin/errors.hpp"
#include "tactwin/parallel.hpp"

namespace tactwin {

const char* orientation_name(StripeOrientation o) {
  return o == StripeOrientation::Horizontal ? "horizontal" : "vertical";
}

void ResolutionParams::validate() const {
  if (!(depth > 0.0)) throw ConfigError("resolution.depth must be positive");
  if (!(blur_per_thickness > 0.0)) throw ConfigError("resolution.blur_per_thickness must be positive");
  if (!(measure_half_size > 0.0 && measure_half_size <= target_half_size)) {
    throw ConfigError("resolution.measure_half_size must lie in (0, target_half_size]");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("resolution.threshold must lie in (0, 1)");
}

std::vector<double> usaf_frequencies(int k_min, int k_max) {
  std::vector<double> out;
  for (int k = k_min; k <= k_max; ++k) out.push_back(std::exp2(k / 6.0));
  return out;
}

double nyquist_frequency(double scale) { return 1.0 / (2.0 * scale); }

namespace {

double smoothed_step(double x, double sigma) { return 0.5 * (1.0 + std::erf(x / (sigma * std::sqrt(2.0)))); }

/// Blurred indicator of [a, b].
double smoothed_box(double x, double a, double b, double sigma) {
  return smoothed_step(x - a, sigma) - smoothed_step(x - b, sigma);
}

}  // namespace

HeightField grating_height_field(double frequency, StripeOrientation o, const SimParams& sim,
                                 const ResolutionParams& params) {
  sim.validate();
  params.validate();
  if (!(frequency > 0.0) || !std::isfinite(frequency)) {
    throw DomainError("grating frequency must be positive");
  }
  const int n = sim.sensor.size_px;
  const double scale = sim.sensor.scale;
  const double half = params.target_half_size;
  if (half >= sim.sensor.extent() / 2.0) throw ConfigError("resolution target exceeds the active area");
  const double sigma = params.blur_per_thickness * sim.material.layer_thickness;
  const double period = 1.0 / frequency;

  std::vector<double> across(n), along(n);
  const int k0 = static_cast<int>(std::floor(-half / period)) - 1;
  const int k1 = static_cast<int>(std::ceil(half / period)) + 1;
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5 - n / 2.0) * scale;
    double z = 0.0;
    for (int k = k0; k <= k1; ++k) {
      const double a = std::max(k * period, -half);
      const double b = std::min(k * period + period / 2.0, half);
      if (b > a) z += smoothed_box(u, a, b, sigma);
    }
    across[i] = params.depth * z;
    along[i] = smoothed_box(u, -half, half, sigma);
  }
  HeightField h(n, n, scale, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      h.at(r, c) = o == StripeOrientation::Vertical ? across[c] * along[r] : across[r] * along[c];
    }
  }
  return h;
}

double modulation(const TactileImage& img, double half_size) {
  double lo = 1.0, hi = 0.0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const Vec2 p = img.pixel_center(r, c);
      if (std::abs(p.x) > half_size || std::abs(p.y) > half_size) continue;
      lo = std::min(lo, img.at(r, c));
      hi = std::max(hi, img.at(r, c));
    }
  }
  if (hi < lo || hi + lo <= 0.0) return 0.0;
  return (hi - lo) / (hi + lo);
}

ResolutionSweep resolution_sweep(const std::vector<double>& frequencies, StripeOrientation o,
                                 const SimParams& sim, const ResolutionParams& params, int threads) {
  params.validate();
  std::vector<double> sorted = frequencies;
  std::sort(sorted.begin(), sorted.end());
  for (double f : sorted) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("resolution frequencies must be positive");
  }
  ResolutionSweep out;
  out.orientation = o;
  out.points.resize(sorted.size());
  const double nyquist = nyquist_frequency(sim.sensor.scale);
  parallel_for(sorted.size(), threads, [&](std::size_t i) {
    ResolutionPoint& p = out.points[i];
    p.frequency = sorted[i];
    if (p.frequency > nyquist) {
      p.resolvable = false;
      p.modulation = 0.0;
      return;
    }
    const TactileImage img = render(grating_height_field(p.frequency, o, sim, params), sim.illumination);
    p.modulation = modulation(img, params.measure_half_size);
  });
  for (const auto& p : out.points) {
    if (p.resolvable && p.modulation >= params.threshold) out.limit = p.frequency;
  }
  return out;
}

std::string sweep_csv(const std::vector<ResolutionSweep>& sweeps) {
  std::string out = "orientation,frequency_lp_mm,modulation,resolvable\n";
  char buf[128];
  for (const auto& s : sweeps) {
    for (const auto& p : s.points) {
      std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%d\n", orientation_name(s.orientation), p.frequency,
                    p.modulation, p.resolvable ? 1 : 0);
      out += buf;
    }
  }
  return out;
}

}  // namespace tactwin
