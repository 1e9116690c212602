#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tactwin/calibration.hpp"
#include "tactwin/dataset.hpp"
#include "tactwin/eval.hpp"
#include "tactwin/toy_head.hpp"

namespace tactwin {

/// Probe sets: five spheres plus the strip; the six-footprint library; the
/// four screw parts.
enum class SuiteKind { SphereStrip, Footprints, Screw };

const char* suite_name(SuiteKind s);
SuiteKind parse_suite(const std::string& name);
std::vector<ProbeSpec> suite_probes(SuiteKind s);

struct RoundTripSpec {
  SuiteKind suite = SuiteKind::SphereStrip;
  std::size_t count = 500;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  double position_range = 4.0;  // mm
  double force_margin = 0.25;   // N above each probe's detection floor
  double iou_threshold = 0.5;

  void validate() const;
};

/// Scenario i uses calibration curve i mod n with force uniform in
/// [floor + force_margin, max_force]; positions are redrawn until the
/// footprint fits. Sample i draws from derive_seed(seed, i).
std::vector<ContactScenario> roundtrip_scenarios(const CalibrationTable& table,
                                                 const RoundTripSpec& spec, const SimParams& sim);

struct RoundTripCase {
  ContactScenario scenario;
  GroundTruth truth;
  std::vector<Detection> detections;
  std::optional<std::size_t> matched;  // class-agnostic match at iou_threshold
};

struct RoundTripResult {
  std::vector<RoundTripCase> cases;
  MetricsReport report;

  /// Force MAE over matched cases whose true force lies in [lo, hi].
  std::optional<double> force_mae(double lo, double hi) const;
  std::size_t misclassified() const;
  std::size_t unmatched() const;
};

/// Classes whose calibration template carries an orientation.
std::vector<std::string> oriented_classes(const CalibrationTable& table, const DecoderParams& dec);

RoundTripResult run_roundtrip(const Decoder& decoder, const RoundTripSpec& spec, const SimParams& sim,
                              int threads = 0);

/// Cell features of the raw difference image and one loss target per record,
/// for the records of `data` whose split is in `splits`, in record order.
/// Class indices follow `data.classes`.
ToyDataset build_toy_dataset(const LoadedDataset& data, const std::vector<Split>& splits,
                             const FeatureParams& features, int threads = 0);

}  // namespace tactwin
