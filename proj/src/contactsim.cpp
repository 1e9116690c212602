#include "tactwin/contactsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "tactwin/errors.hpp"
#include "tactwin/random.hpp"
#include "tactwin/raster_ops.hpp"

namespace tactwin {
namespace {

constexpr double kDecayCutoff = 6.0;  // in membrane sigmas

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt_mm(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// Pixel index range [lo, hi) covering physical coordinates [c - r, c + r].
std::pair<int, int> pixel_span(double c, double r, int n, double scale) {
  const int lo = static_cast<int>(std::floor((c - r) / scale + n / 2.0 - 0.5));
  const int hi = static_cast<int>(std::ceil((c + r) / scale + n / 2.0 - 0.5)) + 1;
  return {std::clamp(lo, 0, n), std::clamp(hi, 0, n)};
}

void add_sphere(HeightField& h, const ContactScenario& s, const SphereProbe& sp,
                const MaterialParams& m) {
  const double radius = sp.diameter / 2.0;
  const auto [d, a] = hertz_indentation(s.force, radius, m.e_star);
  if (d <= 0.0) return;
  const double edge = d - a * a / (2.0 * radius);
  const double cutoff = kDecayCutoff * m.membrane_sigma;
  const double two_s2 = 2.0 * m.membrane_sigma * m.membrane_sigma;
  const auto [r0, r1] = pixel_span(s.y, a + cutoff, h.height, h.scale);
  const auto [c0, c1] = pixel_span(s.x, a + cutoff, h.width, h.scale);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const double dist = norm(h.pixel_center(r, c) - Vec2{s.x, s.y});
      double z = 0.0;
      if (dist <= a) {
        z = d - dist * dist / (2.0 * radius);
      } else if (dist - a <= cutoff) {
        z = edge * std::exp(-(dist - a) * (dist - a) / two_s2);
      }
      h.at(r, c) = std::max(h.at(r, c), z);
    }
  }
}

void add_punch(HeightField& h, const ContactScenario& s, const Stencil& st,
               const MaterialParams& m) {
  const double d = punch_indentation(s.force, st.area(), m.e_star);
  if (d <= 0.0) return;
  const double cutoff = kDecayCutoff * m.membrane_sigma;
  const double two_s2 = 2.0 * m.membrane_sigma * m.membrane_sigma;
  const auto [r0, r1] = pixel_span(s.y, st.reach() + cutoff, h.height, h.scale);
  const auto [c0, c1] = pixel_span(s.x, st.reach() + cutoff, h.width, h.scale);
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const Vec2 local = rotate(h.pixel_center(r, c) - Vec2{s.x, s.y}, -s.theta.value());
      const double out = st.outside_distance(local);
      if (out > cutoff) continue;
      const double z = d * std::exp(-out * out / two_s2);
      h.at(r, c) = std::max(h.at(r, c), z);
    }
  }
}

}  // namespace

std::string probe_class(const ProbeSpec& probe) {
  return std::visit(Overloaded{[](const SphereProbe&) { return std::string("sphere"); },
                               [](const StripProbe&) { return std::string("strip"); },
                               [](const FootprintProbe& f) { return f.class_name; }},
                    probe);
}

std::string probe_label(const ProbeSpec& probe) {
  return std::visit(
      Overloaded{[](const SphereProbe& s) { return "sphere:d=" + fmt_mm(s.diameter); },
                 [](const StripProbe& s) {
                   return "strip:" + fmt_mm(s.length) + "x" + fmt_mm(s.width);
                 },
                 [](const FootprintProbe& f) { return "footprint:" + f.stencil.name(); }},
      probe);
}

void validate_probe(const ProbeSpec& probe) {
  std::visit(Overloaded{[](const SphereProbe& s) {
                          if (!(s.diameter > 0.0) || !std::isfinite(s.diameter)) {
                            throw ScenarioError("sphere diameter must be positive");
                          }
                        },
                        [](const StripProbe& s) {
                          if (!(s.length > 0.0 && s.width > 0.0) || !std::isfinite(s.length) ||
                              !std::isfinite(s.width)) {
                            throw ScenarioError("strip dimensions must be positive");
                          }
                        },
                        [](const FootprintProbe& f) {
                          if (f.class_name.empty()) throw ScenarioError("footprint needs a class");
                          if (f.stencil.parts().empty() || !(f.stencil.area() > 0.0)) {
                            throw ScenarioError("footprint stencil is empty");
                          }
                        }},
             probe);
}

Stencil probe_stencil(const ProbeSpec& probe) {
  if (const auto* s = std::get_if<StripProbe>(&probe)) {
    return Stencil::rectangle("strip", s->length, s->width);
  }
  if (const auto* f = std::get_if<FootprintProbe>(&probe)) return f->stencil;
  throw ContractViolation("sphere probes have no rigid footprint");
}

void MaterialParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("material.") + name + " must be positive");
    }
  };
  positive(e_star, "e_star");
  positive(membrane_sigma, "membrane_sigma");
  positive(layer_thickness, "layer_thickness");
  positive(max_force, "max_force");
}

std::vector<Vec3> IlluminationModel::default_lights() {
  std::vector<Vec3> dirs;
  const double elev = std::numbers::pi / 4.0;
  for (int k = 0; k < 4; ++k) {
    const double az = k * std::numbers::pi / 2.0;
    dirs.push_back({std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                    std::sin(elev)});
  }
  return dirs;
}

void IlluminationModel::validate() const {
  if (!(ambient >= 0.0 && ambient <= 1.0)) throw ConfigError("illumination.ambient not in [0,1]");
  if (!(diffuse >= 0.0 && diffuse <= 1.0)) throw ConfigError("illumination.diffuse not in [0,1]");
  if (ambient + diffuse > 1.0 + 1e-12) {
    throw ConfigError("illumination.ambient + illumination.diffuse exceeds 1");
  }
  if (!(exponent >= 1.0) || !std::isfinite(exponent)) {
    throw ConfigError("illumination.exponent must be >= 1");
  }
  if (light_dirs.empty()) throw ConfigError("illumination.light_dirs is empty");
  for (const Vec3& l : light_dirs) {
    const double n = std::sqrt(l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
    if (std::abs(n - 1.0) > 1e-9) throw ConfigError("illumination.light_dirs must be unit vectors");
  }
}

void SensorGeometry::validate() const {
  if (size_px <= 0 || size_px % 32 != 0) {
    throw ConfigError("sensor.size_px must be a positive multiple of 32");
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("sensor.scale must be positive");
}

void SimParams::validate() const {
  sensor.validate();
  material.validate();
  illumination.validate();
}

Indentation hertz_indentation(double force, double probe_radius, double e_star) {
  if (!(force >= 0.0) || !std::isfinite(force)) throw DomainError("force must be >= 0");
  if (!(probe_radius > 0.0)) throw DomainError("probe radius must be positive");
  if (!(e_star > 0.0)) throw DomainError("e_star must be positive");
  if (force == 0.0) return {};
  const double d = std::pow(3.0 * force / (4.0 * e_star * std::sqrt(probe_radius)), 2.0 / 3.0);
  return {d, std::sqrt(probe_radius * d)};
}

double punch_indentation(double force, double footprint_area, double e_star) {
  if (!(force >= 0.0) || !std::isfinite(force)) throw DomainError("force must be >= 0");
  if (!(footprint_area > 0.0)) throw DomainError("footprint area must be positive");
  if (!(e_star > 0.0)) throw DomainError("e_star must be positive");
  return force / (2.0 * e_star * std::sqrt(footprint_area / std::numbers::pi));
}

void validate_scenario(const ContactScenario& s, const SimParams& p) {
  validate_probe(s.probe);
  if (!std::isfinite(s.x) || !std::isfinite(s.y)) throw ScenarioError("position must be finite");
  if (!(s.force >= 0.0 && s.force <= p.material.max_force)) {
    throw ScenarioError("force " + fmt_mm(s.force) + " N outside [0, " +
                        fmt_mm(p.material.max_force) + "]");
  }
  if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma)) {
    throw ScenarioError("noise_sigma must be >= 0");
  }
  const double half = p.sensor.extent() / 2.0;
  const GroundTruth gt = ground_truth(s, p);
  auto check = [&](Vec2 q) {
    if (std::abs(q.x) > half + 1e-9 || std::abs(q.y) > half + 1e-9) {
      throw ScenarioError("contact footprint of " + probe_label(s.probe) + " at (" +
                          fmt_mm(s.x) + ", " + fmt_mm(s.y) + ") leaves the active area");
    }
  };
  if (std::holds_alternative<SphereProbe>(s.probe)) {
    const double a = gt.box.w / 2.0;
    check({s.x - a, s.y - a});
    check({s.x + a, s.y + a});
  } else {
    for (const Vec2& v : box_to_polygon(gt.box).vertices) check(v);
  }
}

GroundTruth ground_truth(const ContactScenario& s, const SimParams& p) {
  GroundTruth gt;
  gt.class_name = probe_class(s.probe);
  gt.force = s.force;
  if (const auto* sp = std::get_if<SphereProbe>(&s.probe)) {
    const double a = hertz_indentation(s.force, sp->diameter / 2.0, p.material.e_star)
                         .contact_radius;
    const double size = std::max(2.0 * a, p.sensor.scale);
    gt.theta = AngleDeg(0.0);
    gt.box = make_box(s.x, s.y, size, size, 0.0);
  } else {
    const Stencil st = probe_stencil(s.probe);
    gt.theta = s.theta;
    gt.box = make_box(s.x, s.y, st.width(), st.height(), s.theta.value());
  }
  return gt;
}

HeightField height_field(const ContactScenario& s, const SimParams& p) {
  return height_field(std::vector<ContactScenario>{s}, p);
}

HeightField height_field(const std::vector<ContactScenario>& scene, const SimParams& p) {
  p.validate();
  HeightField h(p.sensor.size_px, p.sensor.size_px, p.sensor.scale, 0.0);
  for (const ContactScenario& s : scene) {
    validate_scenario(s, p);
    if (const auto* sp = std::get_if<SphereProbe>(&s.probe)) {
      add_sphere(h, s, *sp, p.material);
    } else {
      add_punch(h, s, probe_stencil(s.probe), p.material);
    }
  }
  return h;
}

TactileImage render(const HeightField& h, const IlluminationModel& illum) {
  illum.validate();
  TactileImage img(h.width, h.height, h.scale, 0.0);
  const double inv_n = 1.0 / static_cast<double>(illum.light_dirs.size());
  auto grad = [&](int r, int c, bool along_cols) {
    const int n = along_cols ? h.width : h.height;
    const int i = along_cols ? c : r;
    auto z = [&](int k) { return along_cols ? h.at(r, k) : h.at(k, c); };
    if (n < 2) return 0.0;
    if (i == 0) return (z(1) - z(0)) / h.scale;
    if (i == n - 1) return (z(n - 1) - z(n - 2)) / h.scale;
    return (z(i + 1) - z(i - 1)) / (2.0 * h.scale);
  };
  for (int r = 0; r < h.height; ++r) {
    for (int c = 0; c < h.width; ++c) {
      const double gx = grad(r, c, true);
      const double gy = grad(r, c, false);
      const double len = std::sqrt(gx * gx + gy * gy + 1.0);
      const Vec3 n{-gx / len, -gy / len, 1.0 / len};
      double acc = 0.0;
      for (const Vec3& l : illum.light_dirs) {
        const double ndotl = n[0] * l[0] + n[1] * l[1] + n[2] * l[2];
        if (ndotl > 0.0) acc += illum.exponent == 1.0 ? ndotl : std::pow(ndotl, illum.exponent);
      }
      img.at(r, c) = std::clamp(illum.ambient + illum.diffuse * acc * inv_n, 0.0, 1.0);
    }
  }
  return img;
}

double flat_baseline(const IlluminationModel& illum) {
  double acc = 0.0;
  for (const Vec3& l : illum.light_dirs) {
    if (l[2] > 0.0) acc += illum.exponent == 1.0 ? l[2] : std::pow(l[2], illum.exponent);
  }
  acc /= static_cast<double>(illum.light_dirs.size());
  return std::clamp(illum.ambient + illum.diffuse * acc, 0.0, 1.0);
}

TactileImage reference_image(const SimParams& p) {
  p.validate();
  TactileImage img(p.sensor.size_px, p.sensor.size_px, p.sensor.scale,
                   flat_baseline(p.illumination));
  img.is_reference = true;
  return img;
}

SimResult simulate(const ContactScenario& s, const SimParams& p, std::uint64_t seed) {
  return simulate_scene(std::vector<ContactScenario>{s}, p, seed);
}

SimResult simulate_scene(const std::vector<ContactScenario>& scene, const SimParams& p,
                         std::uint64_t seed) {
  SimResult out;
  out.image = render(height_field(scene, p), p.illumination);
  double sigma = 0.0;
  for (const ContactScenario& s : scene) {
    sigma = std::max(sigma, s.noise_sigma);
    out.truth.push_back(ground_truth(s, p));
  }
  if (sigma > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& v : out.image.data) v = std::clamp(v + noise(rng), 0.0, 1.0);
  }
  return out;
}

double deviation_area(const TactileImage& img, double baseline, double tolerance) {
  Raster<std::uint8_t> mask(img.width, img.height, img.scale, 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    mask.data[i] = std::abs(img.data[i] - baseline) >= tolerance ? 1 : 0;
  }
  const Raster<std::uint8_t> filled = fill_holes(mask);
  std::size_t count = 0;
  for (auto v : filled.data) count += v;
  return static_cast<double>(count) * img.scale * img.scale;
}

double edge_contrast(const TactileImage& img, double baseline, const ContactScenario& s,
                     const SimParams& p, double band) {
  const auto* sp = std::get_if<SphereProbe>(&s.probe);
  if (!sp) throw ContractViolation("edge_contrast is defined for sphere contacts");
  const double a =
      hertz_indentation(s.force, sp->diameter / 2.0, p.material.e_star).contact_radius;
  double best = 0.0;
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const double dist = norm(img.pixel_center(r, c) - Vec2{s.x, s.y});
      if (std::abs(dist - a) <= band) best = std::max(best, std::abs(img.at(r, c) - baseline));
    }
  }
  return best;
}

}  // namespace tactwin
