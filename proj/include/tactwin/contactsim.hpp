#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tactwin/geometry.hpp"
#include "tactwin/image.hpp"
#include "tactwin/stencil.hpp"

namespace tactwin {

struct SphereProbe {
  double diameter = 10.0;  // mm
};

struct StripProbe {
  double length = 20.0;  // mm
  double width = 4.0;    // mm
};

struct FootprintProbe {
  std::string class_name;
  Stencil stencil;
};

using ProbeSpec = std::variant<SphereProbe, StripProbe, FootprintProbe>;

/// Detection class reported for a probe: "sphere", "strip" or the footprint's
/// class name.
std::string probe_class(const ProbeSpec& probe);
/// Human-readable probe description, e.g. "sphere:d=10" or "footprint:hexagon".
std::string probe_label(const ProbeSpec& probe);
void validate_probe(const ProbeSpec& probe);
/// The rigid footprint of a flat probe. Throws ContractViolation for spheres.
Stencil probe_stencil(const ProbeSpec& probe);

struct ContactScenario {
  ProbeSpec probe = SphereProbe{};
  double x = 0.0;  // mm
  double y = 0.0;  // mm
  AngleDeg theta;
  double force = 0.0;        // N
  double noise_sigma = 0.0;  // intensity units
};

struct MaterialParams {
  double e_star = 0.3;          // N/mm^2
  double membrane_sigma = 2.0;  // mm
  double layer_thickness = 1.6;  // mm
  double max_force = 10.0;      // N

  void validate() const;
};

using Vec3 = std::array<double, 3>;

struct IlluminationModel {
  double ambient = 0.25;
  double diffuse = 0.6;
  double exponent = 1.0;
  std::vector<Vec3> light_dirs = default_lights();

  /// Four lights at 45 degrees elevation, azimuths 0, 90, 180 and 270.
  static std::vector<Vec3> default_lights();
  void validate() const;
};

struct SensorGeometry {
  int size_px = 640;
  double scale = 0.05;  // mm per px

  double extent() const { return size_px * scale; }
  void validate() const;
};

struct SimParams {
  SensorGeometry sensor;
  MaterialParams material;
  IlluminationModel illumination;

  void validate() const;
};

struct GroundTruth {
  OrientedBox box;
  std::string class_name;
  AngleDeg theta;
  double force = 0.0;
};

struct Indentation {
  double depth = 0.0;           // mm
  double contact_radius = 0.0;  // mm
};

/// Hertz sphere-on-flat contact. Throws DomainError on negative force or
/// non-positive radius / modulus.
Indentation hertz_indentation(double force, double probe_radius, double e_star);

/// Flat punch of equivalent circular radius sqrt(area / pi).
double punch_indentation(double force, double footprint_area, double e_star);

/// Scenario validation: force range, noise, probe dimensions and footprint
/// inside the active area. Throws ScenarioError.
void validate_scenario(const ContactScenario& s, const SimParams& p);

GroundTruth ground_truth(const ContactScenario& s, const SimParams& p);

HeightField height_field(const ContactScenario& s, const SimParams& p);

/// Several contacts pressed at once; the membrane takes the pointwise maximum.
HeightField height_field(const std::vector<ContactScenario>& scene, const SimParams& p);

TactileImage render(const HeightField& h, const IlluminationModel& illum);

/// Intensity of an undeformed membrane.
double flat_baseline(const IlluminationModel& illum);

TactileImage reference_image(const SimParams& p);

struct SimResult {
  TactileImage image;
  std::vector<GroundTruth> truth;
};

/// Renders, adds clamped Gaussian noise drawn from `seed` and labels the
/// scenario. Pure in (scenario, params, seed).
SimResult simulate(const ContactScenario& s, const SimParams& p, std::uint64_t seed);

/// Multi-contact version; the noise level is the largest scenario noise_sigma.
SimResult simulate_scene(const std::vector<ContactScenario>& scene, const SimParams& p,
                         std::uint64_t seed);

/// Area (mm^2) of the hole-filled region where |I - baseline| >= tolerance.
double deviation_area(const TactileImage& img, double baseline, double tolerance = 1e-3);

/// Largest |I - baseline| within `band` mm of a sphere's contact circle.
double edge_contrast(const TactileImage& img, double baseline, const ContactScenario& s,
                     const SimParams& p, double band = 0.25);

}  // namespace tactwin
