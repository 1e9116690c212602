#include "tactwin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "tactwin/errors.hpp"
#include "tactwin/parallel.hpp"

namespace fs = std::filesystem;

namespace tactwin {

void ScenarioDistribution::validate(const SimParams& sim) const {
  if (probes.empty()) throw ConfigError("dataset.scenarios.probes must not be empty");
  for (const auto& p : probes) {
    try {
      validate_probe(p);
    } catch (const ScenarioError& e) {
      throw ConfigError(std::string("dataset.scenarios.probes: ") + e.what());
    }
  }
  if (!(force_min >= 0.0 && force_min <= force_max && force_max <= sim.material.max_force)) {
    throw ConfigError("dataset.scenarios.force_range must satisfy 0 <= min <= max <= max_force");
  }
  if (!(position_range >= 0.0 && position_range < sim.sensor.extent() / 2.0)) {
    throw ConfigError("dataset.scenarios.position_range must lie in [0, extent / 2)");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("dataset.scenarios.noise_sigma must be >= 0");
  }
}

ContactScenario sample_scenario(const ScenarioDistribution& dist, const SimParams& sim, Rng& rng) {
  ContactScenario s;
  s.probe = dist.probes[std::uniform_int_distribution<std::size_t>(0, dist.probes.size() - 1)(rng)];
  s.force = uniform(rng, dist.force_min, dist.force_max);
  s.noise_sigma = dist.noise_sigma;
  const bool sphere = std::holds_alternative<SphereProbe>(s.probe);
  s.theta = AngleDeg(dist.random_theta && !sphere ? uniform(rng, 0.0, 180.0) : 0.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    s.x = uniform(rng, -dist.position_range, dist.position_range);
    s.y = uniform(rng, -dist.position_range, dist.position_range);
    try {
      validate_scenario(s, sim);
      return s;
    } catch (const ScenarioError&) {
    }
  }
  throw ScenarioError("no valid position for " + probe_label(s.probe) + " within " +
                      std::to_string(dist.position_range) + " mm");
}

void DatasetSpec::validate(const SimParams& sim) const {
  scenarios.validate(sim);
  if (count == 0) throw ConfigError("dataset.count must be positive");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("dataset.test_fraction must lie in [0, 1)");
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ConfigError("dataset.val_fraction must lie in [0, 1)");
  }
}

Json to_json(const ScenarioDistribution& d) {
  Json probes = Json::array();
  for (const auto& p : d.probes) probes.push_back(to_json(p));
  return Json{{"probes", probes},
              {"force_min", d.force_min},
              {"force_max", d.force_max},
              {"position_range", d.position_range},
              {"random_theta", d.random_theta},
              {"noise_sigma", d.noise_sigma}};
}

Json to_json(const DatasetSpec& d) {
  return Json{{"scenarios", to_json(d.scenarios)},
              {"count", d.count},
              {"seed", d.seed},
              {"test_fraction", d.test_fraction},
              {"val_fraction", d.val_fraction}};
}

void merge_json(const Json& j, const std::string& path, ScenarioDistribution& out) {
  StrictObject o(j, path);
  if (o.has("probes")) {
    const Json& arr = o.at("probes");
    if (!arr.is_array()) throw ConfigError("field '" + o.field("probes") + "' must be an array");
    out.probes.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.probes.push_back(probe_from_json(arr[i], o.field("probes") + "[" + std::to_string(i) + "]"));
    }
  }
  o.get("force_min", out.force_min);
  o.get("force_max", out.force_max);
  o.get("position_range", out.position_range);
  o.get("random_theta", out.random_theta);
  o.get("noise_sigma", out.noise_sigma);
  o.finish();
}

void merge_json(const Json& j, const std::string& path, DatasetSpec& out) {
  StrictObject o(j, path);
  if (o.has("scenarios")) merge_json(o.at("scenarios"), o.field("scenarios"), out.scenarios);
  o.get("count", out.count);
  o.get("seed", out.seed);
  o.get("test_fraction", out.test_fraction);
  o.get("val_fraction", out.val_fraction);
  o.finish();
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw IoError("unknown split '" + name + "'");
}

std::vector<Split> assign_splits(std::size_t count, std::uint64_t seed, double test_fraction,
                                 double val_fraction) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix64(seed ^ 0x5b1d5e7a11ce5eedULL));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(count)));
  const auto n_val =
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(count - n_test)));
  std::vector<Split> out(count, Split::Train);
  for (std::size_t i = 0; i < count; ++i) {
    if (i < n_test) {
      out[order[i]] = Split::Test;
    } else if (i < n_test + n_val) {
      out[order[i]] = Split::Val;
    }
  }
  return out;
}

GroundTruth AnnotationRecord::truth() const {
  GroundTruth gt;
  gt.class_name = class_name;
  gt.force = force_n;
  gt.theta = AngleDeg(theta_deg);
  gt.box = make_box(cx_mm, cy_mm, w_mm, h_mm, theta_deg);
  return gt;
}

fs::path AnnotationRecord::image_path() const {
  char name[32];
  std::snprintf(name, sizeof name, "%06zu.pgm", index);
  return fs::path(split_name(split)) / name;
}

Json to_json(const AnnotationRecord& r) {
  return Json{{"index", r.index},       {"split", split_name(r.split)}, {"class", r.class_name},
              {"cx_mm", r.cx_mm},       {"cy_mm", r.cy_mm},             {"w_mm", r.w_mm},
              {"h_mm", r.h_mm},         {"theta_deg", r.theta_deg},     {"force_n", r.force_n},
              {"probe", r.probe},       {"seed", r.seed}};
}

AnnotationRecord annotation_from_json(const Json& j) {
  AnnotationRecord r;
  try {
    r.index = j.at("index").get<std::size_t>();
    r.split = parse_split(j.at("split").get<std::string>());
    r.class_name = j.at("class").get<std::string>();
    r.cx_mm = j.at("cx_mm").get<double>();
    r.cy_mm = j.at("cy_mm").get<double>();
    r.w_mm = j.at("w_mm").get<double>();
    r.h_mm = j.at("h_mm").get<double>();
    r.theta_deg = j.at("theta_deg").get<double>();
    r.force_n = j.at("force_n").get<double>();
    r.probe = j.at("probe").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed annotation: ") + e.what());
  }
  return r;
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

DatasetSummary generate_dataset(const DatasetSpec& spec, const SimParams& sim, const fs::path& out_dir,
                                int threads) {
  sim.validate();
  spec.validate(sim);
  ensure_dir(out_dir);
  for (Split s : {Split::Train, Split::Val, Split::Test}) ensure_dir(out_dir / split_name(s));

  const std::vector<Split> splits =
      assign_splits(spec.count, spec.seed, spec.test_fraction, spec.val_fraction);
  std::vector<AnnotationRecord> records(spec.count);
  parallel_for(spec.count, threads, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(spec.seed, i);
    Rng rng(seed);
    const ContactScenario s = sample_scenario(spec.scenarios, sim, rng);
    const SimResult r = simulate(s, sim, mix64(seed));
    const GroundTruth& gt = r.truth.front();
    AnnotationRecord& rec = records[i];
    rec.index = i;
    rec.split = splits[i];
    rec.class_name = gt.class_name;
    rec.cx_mm = gt.box.cx;
    rec.cy_mm = gt.box.cy;
    rec.w_mm = gt.box.w;
    rec.h_mm = gt.box.h;
    rec.theta_deg = gt.theta.value();
    rec.force_n = gt.force;
    rec.probe = probe_label(s.probe);
    rec.seed = seed;
    write_pgm16(out_dir / rec.image_path(), r.image);
  });
  write_pgm16(out_dir / "reference.pgm", reference_image(sim));

  std::string lines;
  DatasetSummary summary;
  std::set<std::string> classes;
  for (const auto& rec : records) {
    lines += to_json(rec).dump() + "\n";
    classes.insert(rec.class_name);
    switch (rec.split) {
      case Split::Train:
        ++summary.train;
        break;
      case Split::Val:
        ++summary.val;
        break;
      case Split::Test:
        ++summary.test;
        break;
    }
  }
  write_text(out_dir / "annotations.jsonl", lines);

  Json manifest;
  manifest["version"] = 1;
  manifest["spec"] = to_json(spec);
  manifest["seed"] = spec.seed;
  manifest["count"] = spec.count;
  manifest["counts"] = Json{{"train", summary.train}, {"val", summary.val}, {"test", summary.test}};
  manifest["scale"] = sim.sensor.scale;
  manifest["classes"] = std::vector<std::string>(classes.begin(), classes.end());
  manifest["sim"] = to_json(sim);
  manifest["annotations"] = "annotations.jsonl";
  manifest["reference"] = "reference.pgm";
  summary.manifest = out_dir / "manifest.json";
  write_text(summary.manifest, manifest.dump(2) + "\n");
  return summary;
}

TactileImage LoadedDataset::image(const AnnotationRecord& r) const {
  return read_pgm16(root / r.image_path(), sim.sensor.scale);
}

TactileImage LoadedDataset::reference() const {
  return read_pgm16(root / "reference.pgm", sim.sensor.scale, true);
}

LoadedDataset load_dataset(const fs::path& root) {
  LoadedDataset d;
  d.root = root;
  std::ifstream in(root / "manifest.json");
  if (!in) throw IoError("cannot read " + (root / "manifest.json").string());
  try {
    d.manifest = Json::parse(in);
    merge_json(d.manifest.at("sim"), "sim", d.sim);
    d.classes = d.manifest.at("classes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + root.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError("malformed manifest in " + root.string() + ": " + e.what());
  }
  std::ifstream ann(root / "annotations.jsonl");
  if (!ann) throw IoError("cannot read " + (root / "annotations.jsonl").string());
  std::string line;
  while (std::getline(ann, line)) {
    if (line.empty()) continue;
    try {
      d.records.push_back(annotation_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed annotation line in " + root.string() + ": " + e.what());
    }
  }
  return d;
}

}  // namespace tactwin
