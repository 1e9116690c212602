#include "tactwin/config.hpp"

#include <fstream>

#include "tactwin/errors.hpp"

namespace fs = std::filesystem;

namespace tactwin {

namespace {

Json to_json(const LossParams& p) {
  return Json{{"csl", Json{{"window_radius", p.csl.window_radius}, {"sigma", p.csl.sigma}}},
              {"center_radius", p.center_radius},
              {"assign_iou_weight", p.assign_iou_weight},
              {"dynamic_k_candidates", p.dynamic_k_candidates},
              {"eps", p.eps},
              {"box_fd_step", p.box_fd_step}};
}

void merge_json(const Json& j, const std::string& path, LossParams& out) {
  StrictObject o(j, path);
  if (o.has("csl")) {
    StrictObject c(o.at("csl"), o.field("csl"));
    c.get("window_radius", out.csl.window_radius);
    c.get("sigma", out.csl.sigma);
    c.finish();
  }
  o.get("center_radius", out.center_radius);
  o.get("assign_iou_weight", out.assign_iou_weight);
  o.get("dynamic_k_candidates", out.dynamic_k_candidates);
  o.get("eps", out.eps);
  o.get("box_fd_step", out.box_fd_step);
  o.finish();
}

Json to_json(const ToyHyperParams& p) {
  return Json{{"learning_rate", p.learning_rate},
              {"epochs", p.epochs},
              {"divergence_patience", p.divergence_patience},
              {"divergence_factor", p.divergence_factor}};
}

void merge_json(const Json& j, const std::string& path, ToyHyperParams& out) {
  StrictObject o(j, path);
  o.get("learning_rate", out.learning_rate);
  o.get("epochs", out.epochs);
  o.get("divergence_patience", out.divergence_patience);
  o.get("divergence_factor", out.divergence_factor);
  o.finish();
}

Json to_json(const RoundTripSpec& s) {
  return Json{{"suite", suite_name(s.suite)},
              {"count", s.count},
              {"position_range", s.position_range},
              {"force_margin", s.force_margin},
              {"iou_threshold", s.iou_threshold}};
}

void merge_json(const Json& j, const std::string& path, RoundTripSpec& out) {
  StrictObject o(j, path);
  if (o.has("suite")) {
    std::string name;
    o.get("suite", name);
    out.suite = parse_suite(name);
  }
  o.get("count", out.count);
  o.get("position_range", out.position_range);
  o.get("force_margin", out.force_margin);
  o.get("iou_threshold", out.iou_threshold);
  o.finish();
}

Json to_json(const ResolutionParams& p, int k_min, int k_max) {
  return Json{{"depth", p.depth},
              {"blur_per_thickness", p.blur_per_thickness},
              {"target_half_size", p.target_half_size},
              {"measure_half_size", p.measure_half_size},
              {"threshold", p.threshold},
              {"k_min", k_min},
              {"k_max", k_max}};
}

void merge_json(const Json& j, const std::string& path, ResolutionParams& out, int& k_min,
                int& k_max) {
  StrictObject o(j, path);
  o.get("depth", out.depth);
  o.get("blur_per_thickness", out.blur_per_thickness);
  o.get("target_half_size", out.target_half_size);
  o.get("measure_half_size", out.measure_half_size);
  o.get("threshold", out.threshold);
  o.get("k_min", k_min);
  o.get("k_max", k_max);
  o.finish();
}

Json to_json(const FeatureParams& p) { return Json{{"window_half_sizes", p.window_half_sizes}}; }

void merge_json(const Json& j, const std::string& path, FeatureParams& out) {
  StrictObject o(j, path);
  o.get("window_half_sizes", out.window_half_sizes);
  o.finish();
}

// Keys owned by the top-level config; a nested copy would silently disagree.
void reject_owned(const Json& j, const std::string& path, std::initializer_list<const char*> keys,
                  const char* owner) {
  if (!j.is_object()) return;
  for (const char* k : keys) {
    if (j.contains(k)) {
      throw ConfigError("field '" + path + "." + k + "' is set through the top-level '" + owner + "'");
    }
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (double d : {10.0, 15.0, 20.0, 25.0, 30.0}) dataset.scenarios.probes.push_back(SphereProbe{d});
  resolve();
}

void RunConfig::resolve() {
  dataset.seed = seed;
  roundtrip.seed = seed;
  dataset.scenarios.noise_sigma = noise_sigma;
  roundtrip.noise_sigma = noise_sigma;
  decoder.noise_sigma = noise_sigma;
  toy.loss = loss;
  toy.threads = threads;
}

void RunConfig::validate() const {
  sim.validate();
  decoder.validate();
  loss.validate();
  features.validate();
  toy.validate();
  dataset.validate(sim);
  roundtrip.validate();
  resolution.validate();
  if (resolution_k_min > resolution_k_max) {
    throw ConfigError("resolution.k_min must not exceed resolution.k_max");
  }
  if (!(calibration_step > 0.0 && calibration_step <= sim.material.max_force)) {
    throw ConfigError("calibration_step must lie in (0, max_force]");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

Json to_json(const RunConfig& c) {
  Json dataset = to_json(c.dataset);
  dataset.erase("seed");
  dataset["scenarios"].erase("noise_sigma");
  Json decoder = to_json(c.decoder);
  decoder.erase("noise_sigma");
  return Json{{"seed", c.seed},
              {"noise_sigma", c.noise_sigma},
              {"sim", to_json(c.sim)},
              {"decoder", decoder},
              {"loss", to_json(c.loss)},
              {"features", to_json(c.features)},
              {"toy", to_json(c.toy)},
              {"dataset", dataset},
              {"calibration_step", c.calibration_step},
              {"roundtrip", to_json(c.roundtrip)},
              {"resolution", to_json(c.resolution, c.resolution_k_min, c.resolution_k_max)}};
}

void merge_json(const Json& j, RunConfig& out) {
  StrictObject o(j, "");
  o.get("seed", out.seed);
  o.get("noise_sigma", out.noise_sigma);
  o.get("threads", out.threads);
  if (o.has("sim")) merge_json(o.at("sim"), "sim", out.sim);
  if (o.has("decoder")) {
    reject_owned(o.at("decoder"), "decoder", {"noise_sigma"}, "noise_sigma");
    merge_json(o.at("decoder"), "decoder", out.decoder);
  }
  if (o.has("loss")) merge_json(o.at("loss"), "loss", out.loss);
  if (o.has("features")) merge_json(o.at("features"), "features", out.features);
  if (o.has("toy")) merge_json(o.at("toy"), "toy", out.toy);
  if (o.has("dataset")) {
    const Json& d = o.at("dataset");
    reject_owned(d, "dataset", {"seed"}, "seed");
    if (d.is_object() && d.contains("scenarios")) {
      reject_owned(d.at("scenarios"), "dataset.scenarios", {"noise_sigma"}, "noise_sigma");
    }
    merge_json(d, "dataset", out.dataset);
  }
  o.get("calibration_step", out.calibration_step);
  if (o.has("roundtrip")) merge_json(o.at("roundtrip"), "roundtrip", out.roundtrip);
  if (o.has("resolution")) {
    merge_json(o.at("resolution"), "resolution", out.resolution, out.resolution_k_min,
               out.resolution_k_max);
  }
  o.finish();
  out.resolve();
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig c;
  merge_json(j, c);
  return c;
}

void write_effective_config(const RunConfig& c, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  const fs::path path = dir / "effective_config.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(c).dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tactwin
