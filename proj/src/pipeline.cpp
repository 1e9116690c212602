#include "tactwin/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tactwin/errors.hpp"
#include "tactwin/parallel.hpp"
#include "tactwin/random.hpp"

namespace tactwin {

const char* suite_name(SuiteKind s) {
  switch (s) {
    case SuiteKind::SphereStrip:
      return "sphere-strip";
    case SuiteKind::Footprints:
      return "footprints";
    case SuiteKind::Screw:
      return "screw";
  }
  return "sphere-strip";
}

SuiteKind parse_suite(const std::string& name) {
  if (name == "sphere-strip") return SuiteKind::SphereStrip;
  if (name == "footprints") return SuiteKind::Footprints;
  if (name == "screw") return SuiteKind::Screw;
  throw ConfigError("suite must be sphere-strip, footprints or screw (got '" + name + "')");
}

std::vector<ProbeSpec> suite_probes(SuiteKind s) {
  std::vector<ProbeSpec> out;
  switch (s) {
    case SuiteKind::SphereStrip:
      for (double d : {10.0, 15.0, 20.0, 25.0, 30.0}) out.push_back(SphereProbe{d});
      out.push_back(StripProbe{});
      break;
    case SuiteKind::Footprints:
      for (const Stencil& st : footprint_library()) out.push_back(FootprintProbe{st.name(), st});
      break;
    case SuiteKind::Screw:
      for (const Stencil& st : screw_part_library()) out.push_back(FootprintProbe{st.name(), st});
      break;
  }
  return out;
}

void RoundTripSpec::validate() const {
  if (count == 0) throw ConfigError("roundtrip.count must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("roundtrip.noise_sigma must be >= 0");
  if (!(position_range >= 0.0)) throw ConfigError("roundtrip.position_range must be >= 0");
  if (!(force_margin >= 0.0)) throw ConfigError("roundtrip.force_margin must be >= 0");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError("roundtrip.iou_threshold must lie in (0, 1]");
  }
}

std::vector<ContactScenario> roundtrip_scenarios(const CalibrationTable& table,
                                                 const RoundTripSpec& spec, const SimParams& sim) {
  spec.validate();
  if (table.curves.empty()) throw ContractViolation("calibration table has no curves");
  std::vector<ContactScenario> out(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const CalibrationCurve& curve = table.curves[i % table.curves.size()];
    Rng rng(derive_seed(spec.seed, i));
    const double lo = std::min(curve.detection_floor() + spec.force_margin, sim.material.max_force);
    ContactScenario s;
    s.probe = curve.probe;
    s.force = uniform(rng, lo, sim.material.max_force);
    s.noise_sigma = spec.noise_sigma;
    s.theta = std::holds_alternative<SphereProbe>(s.probe) ? AngleDeg(0.0)
                                                           : AngleDeg(uniform(rng, 0.0, 180.0));
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      s.x = uniform(rng, -spec.position_range, spec.position_range);
      s.y = uniform(rng, -spec.position_range, spec.position_range);
      try {
        validate_scenario(s, sim);
        placed = true;
      } catch (const ScenarioError&) {
      }
    }
    if (!placed) throw ScenarioError("no valid position for " + probe_label(s.probe));
    out[i] = s;
  }
  return out;
}

std::optional<double> RoundTripResult::force_mae(double lo, double hi) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cases) {
    if (!c.matched || c.truth.force < lo || c.truth.force > hi) continue;
    sum += std::abs(c.detections[*c.matched].force - c.truth.force);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::size_t RoundTripResult::misclassified() const {
  std::size_t n = 0;
  for (const auto& c : cases) {
    if (c.matched && c.detections[*c.matched].class_name != c.truth.class_name) ++n;
  }
  return n;
}

std::size_t RoundTripResult::unmatched() const {
  return static_cast<std::size_t>(
      std::count_if(cases.begin(), cases.end(), [](const RoundTripCase& c) { return !c.matched; }));
}

std::vector<std::string> oriented_classes(const CalibrationTable& table, const DecoderParams& dec) {
  std::set<std::string> out;
  for (const auto& c : table.curves) {
    if (c.oriented(dec.isotropy_threshold)) out.insert(c.class_name);
  }
  return {out.begin(), out.end()};
}

RoundTripResult run_roundtrip(const Decoder& decoder, const RoundTripSpec& spec, const SimParams& sim,
                              int threads) {
  const std::vector<ContactScenario> scenarios = roundtrip_scenarios(decoder.table(), spec, sim);
  const TactileImage reference = reference_image(sim);
  RoundTripResult result;
  result.cases.resize(scenarios.size());
  parallel_for(scenarios.size(), threads, [&](std::size_t i) {
    RoundTripCase& c = result.cases[i];
    c.scenario = scenarios[i];
    const SimResult r = simulate(c.scenario, sim, mix64(derive_seed(spec.seed, i)));
    c.truth = r.truth.front();
    c.detections = decoder.decode(r.image, reference);
    const MatchResult m = match_detections(c.detections, r.truth, spec.iou_threshold, false);
    if (!m.pairs.empty()) c.matched = m.pairs.front().detection;
  });
  std::vector<EvalSample> samples;
  samples.reserve(result.cases.size());
  for (const auto& c : result.cases) samples.push_back({c.detections, {c.truth}});
  result.report = evaluate(samples, decoder.table().class_names(),
                           oriented_classes(decoder.table(), decoder.params()), spec.iou_threshold);
  return result;
}

ToyDataset build_toy_dataset(const LoadedDataset& data, const std::vector<Split>& splits,
                             const FeatureParams& features, int threads) {
  features.validate();
  ToyDataset out;
  out.grid = build_region_grid(data.sim.sensor.size_px);
  out.scale = data.sim.sensor.scale;
  out.dim = features.dim();
  out.classes = std::max<std::size_t>(1, data.classes.size());
  std::vector<const AnnotationRecord*> chosen;
  for (const auto& r : data.records) {
    if (std::find(splits.begin(), splits.end(), r.split) != splits.end()) chosen.push_back(&r);
  }
  const TactileImage reference = data.reference();
  out.samples.resize(chosen.size());
  parallel_for(chosen.size(), threads, [&](std::size_t i) {
    const AnnotationRecord& r = *chosen[i];
    const auto it = std::find(data.classes.begin(), data.classes.end(), r.class_name);
    if (it == data.classes.end()) throw IoError("annotation class '" + r.class_name + "' not in manifest");
    const GroundTruth gt = r.truth();
    ToySample& s = out.samples[i];
    s.features = cell_features(difference_image(data.image(r), reference), out.grid, features);
    s.targets.push_back({gt.box, static_cast<std::size_t>(it - data.classes.begin()), gt.theta, gt.force});
  });
  return out;
}

}  // namespace tactwin
