#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tactwin/contactsim.hpp"

namespace tactwin {

enum class StripeOrientation { Horizontal, Vertical };

const char* orientation_name(StripeOrientation o);

/// Pressed square-wave grating. Stripe edges are blurred by a Gaussian of
/// sigma = blur_per_thickness * layer_thickness.
struct ResolutionParams {
  double depth = 0.3;               // mm
  double blur_per_thickness = 0.04;
  double target_half_size = 6.0;    // mm, half side of the grating patch
  double measure_half_size = 4.0;   // mm, half side of the modulation window
  double threshold = 0.1;

  void validate() const;
};

struct ResolutionPoint {
  double frequency = 0.0;  // lp/mm
  double modulation = 0.0;
  bool resolvable = true;  // false above the pixel Nyquist frequency
};

struct ResolutionSweep {
  StripeOrientation orientation = StripeOrientation::Horizontal;
  std::vector<ResolutionPoint> points;
  std::optional<double> limit;  // last frequency with modulation >= threshold
};

/// 2^(k/6) lp/mm for k in [k_min, k_max], the element spacing of a USAF target.
std::vector<double> usaf_frequencies(int k_min = -6, int k_max = 24);

double nyquist_frequency(double scale_mm_per_px);

/// Horizontal stripes vary along y, vertical stripes along x.
HeightField grating_height_field(double frequency, StripeOrientation o, const SimParams& sim,
                                 const ResolutionParams& params);

/// Michelson contrast (max - min) / (max + min) inside the centred window.
double modulation(const TactileImage& img, double half_size);

ResolutionSweep resolution_sweep(const std::vector<double>& frequencies, StripeOrientation o,
                                 const SimParams& sim, const ResolutionParams& params = {},
                                 int threads = 0);

/// CSV with header `orientation,frequency_lp_mm,modulation,resolvable`.
std::string sweep_csv(const std::vector<ResolutionSweep>& sweeps);

}  // namespace tactwin
