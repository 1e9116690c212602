#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tactwin/contactsim.hpp"
#include "tactwin/decoder.hpp"

namespace tactwin {

struct MatchPair {
  std::size_t detection = 0;
  std::size_t truth = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> false_positives;  // detection indices
  std::vector<std::size_t> false_negatives;  // truth indices
};

/// Greedy matching: detections in descending score (ties by ascending index)
/// each take the unmatched truth with the highest IoU >= threshold (ties by
/// ascending truth index). With `class_aware`, only same-class pairs match.
MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<GroundTruth>& truths, double iou_threshold = 0.5,
                             bool class_aware = false);

/// Mean absolute error; nullopt for an empty set.
std::optional<double> mae(const std::vector<double>& pred, const std::vector<double>& truth);
std::optional<double> angle_mae(const std::vector<AngleDeg>& pred, const std::vector<AngleDeg>& truth);
std::optional<double> location_mae(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth);

/// One image worth of detections and labels.
struct EvalSample {
  std::vector<Detection> detections;
  std::vector<GroundTruth> truths;
};

struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> ap;
  std::optional<double> f1;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t truths = 0;
  std::vector<std::pair<double, double>> curve;  // (recall, precision) per distinct score, descending
};

/// Class-aware PR statistics over a split. `class_name` empty pools all
/// classes. AP is the all-point interpolated area under the PR curve.
PrecisionRecall precision_recall_ap(const std::vector<EvalSample>& samples, double iou_threshold,
                                    const std::string& class_name = "");

/// F1 from precision and recall; nullopt when either is undefined.
std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall);

struct ConfusionMatrix {
  std::vector<std::string> classes;
  /// counts[gt][pred] over matched pairs; column classes.size() counts
  /// unmatched truths ("missed").
  std::vector<std::vector<std::size_t>> counts;

  std::size_t missed(std::size_t gt_class) const { return counts[gt_class].back(); }
  std::optional<double> recall(std::size_t gt_class) const;
};

/// Class-agnostic matching per sample, then counts by (truth class, detected class).
ConfusionMatrix confusion_matrix(const std::vector<EvalSample>& samples,
                                 const std::vector<std::string>& classes, double iou_threshold);

struct ClassMetrics {
  std::string name;
  std::size_t truths = 0;
  std::size_t detections = 0;
  std::size_t matched = 0;
  std::optional<double> force_mae;
  std::optional<double> angle_mae;
  std::optional<double> location_mae;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> ap50;
  std::optional<double> f1;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
  int version = 1;
  double iou_threshold = 0.5;
  std::size_t samples = 0;
  std::vector<std::string> classes;
  std::vector<std::string> oriented_classes;
  ClassMetrics overall;
  std::optional<double> map50;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix confusion;

  friend bool operator==(const MetricsReport& a, const MetricsReport& b) {
    return a.version == b.version && a.iou_threshold == b.iou_threshold &&
           a.samples == b.samples && a.classes == b.classes &&
           a.oriented_classes == b.oriented_classes && a.overall == b.overall &&
           a.map50 == b.map50 && a.per_class == b.per_class &&
           a.confusion.classes == b.confusion.classes && a.confusion.counts == b.confusion.counts;
  }
};

/// Force, angle and location MAE use class-agnostic matches grouped by the
/// truth class; angle MAE covers only `oriented_classes`. Precision, recall,
/// AP and F1 use class-aware matching.
MetricsReport evaluate(const std::vector<EvalSample>& samples, std::vector<std::string> classes,
                       const std::vector<std::string>& oriented_classes,
                       double iou_threshold = 0.5);

/// Writes `path` (JSON) and a fixed-width text table next to it (.txt).
void write_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report(const std::filesystem::path& path);
std::string report_table(const MetricsReport& report);

}  // namespace tactwin
