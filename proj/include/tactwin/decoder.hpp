#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tactwin/geometry.hpp"
#include "tactwin/image.hpp"

namespace tactwin {

struct DecoderParams {
  double smoothing_sigma_px = 3.0;
  double min_threshold = 0.01;
  double noise_sigma = 0.0;  // expected sensor noise, intensity units
  double noise_factor = 3.0;
  double min_area = 1.0;         // mm^2
  double merge_gap = 1.0;        // mm; fragments closer than this share a blob
  double profile_bin = 0.1;      // mm
  double profile_radius = 16.0;  // mm
  int canonical_size = 64;
  double canonical_scale = 0.5;  // mm per canonical cell
  double isotropy_threshold = 0.05;
  double box_lo_quantile = 0.02;
  double box_hi_quantile = 0.98;

  void validate() const;
  /// Threshold on the smoothed deviation: noise_factor times the smoothed
  /// noise level, never below min_threshold.
  double threshold() const;
};

using DeviationMap = Raster<double>;

/// img - reference, unclamped. Throws ContractViolation on shape mismatch or
/// when `reference` is not flagged as a reference frame.
DeviationMap difference_image(const TactileImage& img, const TactileImage& reference);

/// Difference followed by the decoder's Gaussian smoothing.
DeviationMap prepare_deviation(const TactileImage& img, const TactileImage& reference,
                               const DecoderParams& params);

struct Blob {
  std::vector<std::size_t> pixels;  // raster indices, ascending
  int group = 0;                    // label in the hole-filled mask
  double area = 0.0;                // mm^2
  double filled_area = 0.0;         // mm^2, holes included
  double mass = 0.0;                // sum |dev| * px area, mm^2
  Vec2 centroid;                    // |dev|-weighted, mm
  double mu20 = 0.0;
  double mu02 = 0.0;
  double mu11 = 0.0;
  double mean_dev = 0.0;
  double peak_dev = 0.0;
  double edge_contrast = 0.0;  // peak |dev| on the blob's outer boundary pixels
};

/// Components of |dev| >= threshold. Pixels are grouped on the mask dilated
/// by merge_gap / 2 and hole-filled (8-connected), so nested rings and broken
/// arcs of one contact stay together; groups whose own mask area is below
/// min_area are dropped. Sorted by descending mass.
std::vector<Blob> extract_blobs(const DeviationMap& dev, double threshold,
                                double min_area = 1.0, double merge_gap = 0.0);

struct PoseEstimate {
  AngleDeg theta;
  double principal_angle = 0.0;  // degrees, [0, 180)
  double eccentricity = 0.0;     // (l1 - l2) / (l1 + l2)
  bool low_confidence = false;
};

/// Principal-axis orientation from the weighted central moments. Throws
/// DecodeError for degenerate moments.
PoseEstimate estimate_pose(const Blob& blob, double isotropy_threshold = 0.05);

/// Radial mean |dev| around the blob centroid, excluding pixels of other
/// groups. `labels` is the group raster from blob_groups().
std::vector<double> radial_profile(const DeviationMap& dev, const Raster<int>& labels,
                                   const Blob& blob, const DecoderParams& params);

/// Group label raster matching extract_blobs' grouping.
Raster<int> blob_groups(const DeviationMap& dev, double threshold, double merge_gap = 0.0);

/// Blob mask resampled on a canonical grid centred on the centroid and rotated
/// by `rotation_deg`: cell q samples the blob at centroid + R(rotation) q.
struct CanonicalMask {
  int size = 0;
  double scale = 0.0;
  std::vector<double> cells;  // row-major, values in [0, 1]
};

/// Block-averaged blob mask used as the sampling source for canonical masks.
struct CoarseMask {
  Raster<double> coarse;
  int factor = 1;
  int fine_width = 0;
  int fine_height = 0;
  double fine_scale = 0.0;

  double sample(Vec2 mm) const;
};

CoarseMask coarse_mask(const Blob& blob, int width, int height, double scale,
                       const DecoderParams& params);
CanonicalMask canonical_mask(const CoarseMask& src, Vec2 center, double rotation_deg,
                             const DecoderParams& params);

/// Cosine similarity of two canonical masks, in [0, 1].
double mask_correlation(const CanonicalMask& a, const CanonicalMask& b);

struct ClassTemplate {
  std::string class_name;
  CanonicalMask mask;  // at rotation 0
};

struct ClassMatch {
  std::string class_name;
  double score = 0.0;
  double rotation = 0.0;  // degrees in [0, 360)
};

/// Best rotation of `src` against one template: coarse 5-degree search over a
/// full turn, refined in 0.5-degree steps.
ClassMatch match_template(const CoarseMask& src, Vec2 center, const ClassTemplate& tmpl,
                          const DecoderParams& params);

/// Argmax over templates; ties go to the lexicographically smallest class.
/// Throws ContractViolation when `templates` is empty.
ClassMatch classify(const CoarseMask& src, Vec2 center, const std::vector<ClassTemplate>& templates,
                    const DecoderParams& params);

struct Detection {
  OrientedBox box;
  std::string class_name;
  std::string variant;  // calibration curve used, e.g. "sphere:d=10"
  AngleDeg theta;
  double force = 0.0;
  double score = 0.0;
  bool low_confidence_pose = false;
  bool force_out_of_range = false;
};

}  // namespace tactwin
