#include "tactwin/serialize.hpp"

#include <cstdio>

#include "tactwin/stencil.hpp"

namespace tactwin {

StrictObject::StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) {
    throw ConfigError("field '" + (path_.empty() ? std::string("<root>") : path_) +
                      "' must be a JSON object");
  }
}

const Json& StrictObject::at(const std::string& key) {
  seen_.insert(key);
  return j_.at(key);
}

void StrictObject::finish() const {
  for (const auto& [key, value] : j_.items()) {
    if (!seen_.count(key)) throw ConfigError("unknown field '" + field(key) + "'");
  }
}

Json to_json(const SensorGeometry& s) {
  return Json{{"size_px", s.size_px}, {"scale", s.scale}};
}

Json to_json(const MaterialParams& m) {
  return Json{{"e_star", m.e_star},
              {"membrane_sigma", m.membrane_sigma},
              {"layer_thickness", m.layer_thickness},
              {"max_force", m.max_force}};
}

Json to_json(const IlluminationModel& m) {
  Json dirs = Json::array();
  for (const Vec3& l : m.light_dirs) dirs.push_back({l[0], l[1], l[2]});
  return Json{{"ambient", m.ambient},
              {"diffuse", m.diffuse},
              {"exponent", m.exponent},
              {"light_dirs", dirs}};
}

Json to_json(const SimParams& p) {
  return Json{{"sensor", to_json(p.sensor)},
              {"material", to_json(p.material)},
              {"illumination", to_json(p.illumination)}};
}

Json to_json(const DecoderParams& p) {
  return Json{{"smoothing_sigma_px", p.smoothing_sigma_px},
              {"min_threshold", p.min_threshold},
              {"noise_sigma", p.noise_sigma},
              {"noise_factor", p.noise_factor},
              {"min_area", p.min_area},
              {"merge_gap", p.merge_gap},
              {"profile_bin", p.profile_bin},
              {"profile_radius", p.profile_radius},
              {"canonical_size", p.canonical_size},
              {"canonical_scale", p.canonical_scale},
              {"isotropy_threshold", p.isotropy_threshold},
              {"box_lo_quantile", p.box_lo_quantile},
              {"box_hi_quantile", p.box_hi_quantile}};
}

Json to_json(const ProbeSpec& p) {
  if (const auto* s = std::get_if<SphereProbe>(&p)) {
    return Json{{"type", "sphere"}, {"diameter", s->diameter}};
  }
  if (const auto* s = std::get_if<StripProbe>(&p)) {
    return Json{{"type", "strip"}, {"length", s->length}, {"width", s->width}};
  }
  const auto& f = std::get<FootprintProbe>(p);
  return Json{{"type", "footprint"}, {"class", f.class_name}, {"stencil", f.stencil.name()}};
}

Json to_json(const OrientedBox& b) {
  return Json{{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}, {"theta", b.theta.value()}};
}

Json to_json(const Detection& d) {
  return Json{{"class", d.class_name},
              {"variant", d.variant},
              {"score", d.score},
              {"cx_mm", d.box.cx},
              {"cy_mm", d.box.cy},
              {"w_mm", d.box.w},
              {"h_mm", d.box.h},
              {"theta_deg", d.theta.value()},
              {"force_n", d.force},
              {"low_confidence_pose", d.low_confidence_pose},
              {"force_out_of_range", d.force_out_of_range}};
}

Detection detection_from_json(const Json& j) {
  Detection d;
  try {
    d.class_name = j.at("class").get<std::string>();
    d.variant = j.value("variant", std::string());
    d.score = j.at("score").get<double>();
    const double theta = j.at("theta_deg").get<double>();
    d.box = make_box(j.at("cx_mm").get<double>(), j.at("cy_mm").get<double>(),
                     j.at("w_mm").get<double>(), j.at("h_mm").get<double>(), theta);
    d.theta = AngleDeg(theta);
    d.force = j.at("force_n").get<double>();
    d.low_confidence_pose = j.value("low_confidence_pose", false);
    d.force_out_of_range = j.value("force_out_of_range", false);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed detection: ") + e.what());
  } catch (const DomainError& e) {
    throw IoError(std::string("malformed detection: ") + e.what());
  }
  return d;
}

void merge_json(const Json& j, const std::string& path, SensorGeometry& out) {
  StrictObject o(j, path);
  o.get("size_px", out.size_px);
  o.get("scale", out.scale);
  o.finish();
}

void merge_json(const Json& j, const std::string& path, MaterialParams& out) {
  StrictObject o(j, path);
  o.get("e_star", out.e_star);
  o.get("membrane_sigma", out.membrane_sigma);
  o.get("layer_thickness", out.layer_thickness);
  o.get("max_force", out.max_force);
  o.finish();
}

void merge_json(const Json& j, const std::string& path, IlluminationModel& out) {
  StrictObject o(j, path);
  o.get("ambient", out.ambient);
  o.get("diffuse", out.diffuse);
  o.get("exponent", out.exponent);
  if (o.has("light_dirs")) {
    std::vector<std::vector<double>> dirs;
    o.get("light_dirs", dirs);
    out.light_dirs.clear();
    for (const auto& d : dirs) {
      if (d.size() != 3) throw ConfigError("field '" + o.field("light_dirs") + "' needs 3-vectors");
      out.light_dirs.push_back({d[0], d[1], d[2]});
    }
  }
  o.finish();
}

void merge_json(const Json& j, const std::string& path, SimParams& out) {
  StrictObject o(j, path);
  if (o.has("sensor")) merge_json(o.at("sensor"), o.field("sensor"), out.sensor);
  if (o.has("material")) merge_json(o.at("material"), o.field("material"), out.material);
  if (o.has("illumination")) {
    merge_json(o.at("illumination"), o.field("illumination"), out.illumination);
  }
  o.finish();
}

void merge_json(const Json& j, const std::string& path, DecoderParams& out) {
  StrictObject o(j, path);
  o.get("smoothing_sigma_px", out.smoothing_sigma_px);
  o.get("min_threshold", out.min_threshold);
  o.get("noise_sigma", out.noise_sigma);
  o.get("noise_factor", out.noise_factor);
  o.get("min_area", out.min_area);
  o.get("merge_gap", out.merge_gap);
  o.get("profile_bin", out.profile_bin);
  o.get("profile_radius", out.profile_radius);
  o.get("canonical_size", out.canonical_size);
  o.get("canonical_scale", out.canonical_scale);
  o.get("isotropy_threshold", out.isotropy_threshold);
  o.get("box_lo_quantile", out.box_lo_quantile);
  o.get("box_hi_quantile", out.box_hi_quantile);
  o.finish();
}

ProbeSpec probe_from_json(const Json& j, const std::string& path) {
  StrictObject o(j, path);
  std::string type;
  o.get("type", type);
  ProbeSpec probe;
  if (type == "sphere") {
    SphereProbe s;
    o.get("diameter", s.diameter);
    probe = s;
  } else if (type == "strip") {
    StripProbe s;
    o.get("length", s.length);
    o.get("width", s.width);
    probe = s;
  } else if (type == "footprint") {
    std::string cls, stencil;
    o.get("class", cls);
    o.get("stencil", stencil);
    if (stencil.empty()) stencil = cls;
    if (cls.empty()) cls = stencil;
    probe = FootprintProbe{cls, find_stencil(stencil)};
  } else {
    throw ConfigError("field '" + o.field("type") + "' must be sphere, strip or footprint");
  }
  o.finish();
  try {
    validate_probe(probe);
  } catch (const ScenarioError& e) {
    throw ConfigError("field '" + path + "': " + e.what());
  }
  return probe;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string canonical_dump(const Json& j) {
  // nlohmann::json keeps object keys sorted.
  return nlohmann::json::parse(j.dump()).dump();
}

}  // namespace tactwin
