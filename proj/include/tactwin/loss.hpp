#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tactwin/encoding.hpp"
#include "tactwin/geometry.hpp"

namespace tactwin {

struct LossParams {
  CslParams csl;
  double center_radius = 2.5;  // in strides
  double assign_iou_weight = 3.0;
  int dynamic_k_candidates = 10;
  double eps = 1e-7;
  double box_fd_step = 1e-4;

  void validate() const;
};

double bce(double p, double y, double eps = 1e-7);
/// d bce / d p with p clamped to [eps, 1 - eps]; zero outside the clamp range.
double bce_grad(double p, double y, double eps = 1e-7);
double smooth_l1(double x);
double smooth_l1_grad(double x);
/// 1 - IoU^2.
double box_loss(const OrientedBox& pred, const OrientedBox& gt);

inline constexpr std::size_t kBoxParams = 5;  // dx, dy, w, h, theta

/// Per-cell network outputs, stored channel by channel.
struct PredictionField {
  std::size_t cells = 0;
  std::size_t classes = 0;
  std::vector<double> obj;    // [cells]
  std::vector<double> cls;    // [cells * classes]
  std::vector<double> csl;    // [cells * kCslBins]
  std::vector<double> force;  // [cells]
  std::vector<double> box;    // [cells * kBoxParams], offsets and size in mm, theta in degrees

  PredictionField() = default;
  PredictionField(std::size_t cells, std::size_t classes);

  double& cls_at(std::size_t cell, std::size_t k) { return cls[cell * classes + k]; }
  double cls_at(std::size_t cell, std::size_t k) const { return cls[cell * classes + k]; }
  double& csl_at(std::size_t cell, std::size_t b) { return csl[cell * kCslBins + b]; }
  double csl_at(std::size_t cell, std::size_t b) const { return csl[cell * kCslBins + b]; }
  double* box_at(std::size_t cell) { return &box[cell * kBoxParams]; }
  const double* box_at(std::size_t cell) const { return &box[cell * kBoxParams]; }

  /// Box of `cell` in the physical frame: cell centre plus (dx, dy); w and h
  /// floored at 1e-3 mm.
  OrientedBox decoded_box(const RegionGrid& grid, std::size_t cell, double scale) const;
  /// Raw box parameters that decode to `b` at `cell`.
  void set_box(const RegionGrid& grid, std::size_t cell, double scale, const OrientedBox& b);
};

/// Box encoded by raw parameters (dx, dy, w, h, theta) at `cell`.
OrientedBox decode_box_params(const RegionGrid& grid, std::size_t cell, double scale,
                              const double* raw);

/// Central-difference gradient of box_loss with respect to the raw box
/// parameters of `cell`.
std::array<double, kBoxParams> box_loss_gradient(const RegionGrid& grid, std::size_t cell,
                                                 double scale, const double* raw,
                                                 const OrientedBox& gt, double step);

struct LossTarget {
  OrientedBox box;
  std::size_t class_index = 0;
  AngleDeg theta;
  double force = 0.0;
};

inline constexpr std::ptrdiff_t kUnassigned = -1;

struct Assignment {
  std::vector<std::vector<std::size_t>> positives;  // per target, ascending
  std::vector<std::ptrdiff_t> owner;                // per cell: target index or kUnassigned

  std::size_t total_positives() const;
};

/// Cells eligible for `target`: centre inside the box or within
/// center_radius strides of the box centre.
std::vector<std::size_t> candidate_cells(const RegionGrid& grid, double scale,
                                         const OrientedBox& box, double center_radius);

/// Dynamic-k cost-based assignment. Throws AssignmentError when a target has
/// no candidate cell or cannot keep at least one positive.
Assignment simota_assign(const PredictionField& preds, const std::vector<LossTarget>& targets,
                         const RegionGrid& grid, double scale, const LossParams& params,
                         int threads = 1);

/// Throws ContractViolation unless `a` is a valid assignment for the field.
void check_assignment(const Assignment& a, const PredictionField& preds,
                      const std::vector<LossTarget>& targets);

struct LossBreakdown {
  double cls = 0.0;
  double csl = 0.0;
  double force = 0.0;
  double box = 0.0;
  double obj = 0.0;
  double total = 0.0;
};

LossBreakdown total_loss(const PredictionField& preds, const std::vector<LossTarget>& targets,
                         const Assignment& assignment, const RegionGrid& grid, double scale,
                         const LossParams& params);

/// Analytic gradient for the probability and force channels; the box channel
/// uses central differences of 1 - IoU^2 with step params.box_fd_step.
PredictionField loss_gradient(const PredictionField& preds, const std::vector<LossTarget>& targets,
                              const Assignment& assignment, const RegionGrid& grid, double scale,
                              const LossParams& params);

}  // namespace tactwin
