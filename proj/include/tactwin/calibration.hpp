#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tactwin/contactsim.hpp"
#include "tactwin/decoder.hpp"

namespace tactwin {

/// One forward-model sample of a probe pressed at the origin with theta = 0.
/// Rows below the detection floor have area = mass = 0 and no template.
struct CalibrationRow {
  double force = 0.0;
  double area = 0.0;
  double mass = 0.0;
  double contrast = 0.0;  // peak |dev|
  std::vector<double> profile;
  double principal_angle = 0.0;
  double eccentricity = 0.0;
  Vec2 centroid_offset;  // blob centroid minus probe centre
  double extent_u = 0.0;  // quantile extent along x
  double extent_v = 0.0;  // quantile extent along y
  double box_w = 0.0;
  double box_h = 0.0;
  CanonicalMask mask;

  bool detected() const { return mass > 0.0; }
};

struct CalibrationCurve {
  std::string class_name;
  std::string variant;
  ProbeSpec probe;
  std::vector<CalibrationRow> rows;

  /// Index of the first detected row.
  std::size_t floor_index() const;
  double detection_floor() const { return rows[floor_index()].force; }
  /// Template of the largest-force row is elongated enough to carry a pose.
  bool oriented(double isotropy_threshold) const;
};

struct CalibrationTable {
  std::string param_hash;
  std::vector<double> forces;
  std::vector<CalibrationCurve> curves;

  std::vector<std::string> class_names() const;  // sorted, unique
  const CalibrationCurve& curve(const std::string& variant) const;
};

/// Force grid 0, step, 2 step, ... up to max_force inclusive.
std::vector<double> force_grid(double step, double max_force);

/// FNV-1a over the canonical JSON of every parameter the calibration depends on.
std::string calibration_hash(const SimParams& sim, const DecoderParams& dec,
                             const std::vector<double>& forces);

/// Forward-model sweep for each probe. Throws CalibrationError when area or
/// mass fails to increase strictly once the probe becomes detectable, or when
/// a probe is never detected.
CalibrationTable build_calibration(const std::vector<ProbeSpec>& probes, const SimParams& sim,
                                   const DecoderParams& dec, const std::vector<double>& forces,
                                   int threads = 0);

void save_calibration(const CalibrationTable& table, const std::filesystem::path& path);
CalibrationTable load_calibration(const std::filesystem::path& path);

struct ForceEstimate {
  double force = 0.0;
  bool out_of_range = false;
};

/// Monotone (PCHIP) inverse of the mass-to-force curve, clamped to the grid.
ForceEstimate estimate_force(const Blob& blob, const CalibrationCurve& curve);

/// Row scalars linearly interpolated at `force` between detected rows; the
/// template and profile come from the nearest detected row.
CalibrationRow interpolate_row(const CalibrationCurve& curve, double force);

/// Calibration-backed decoder. Construction checks the table's hash against
/// the current parameters and throws StaleCalibrationError on mismatch.
class Decoder {
 public:
  Decoder(CalibrationTable table, const SimParams& sim, const DecoderParams& params);

  std::vector<Detection> decode(const TactileImage& img, const TactileImage& reference) const;

  const CalibrationTable& table() const { return table_; }
  const DecoderParams& params() const { return params_; }

 private:
  CalibrationTable table_;
  DecoderParams params_;
  double max_force_ = 10.0;
};

}  // namespace tactwin
