#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "tactwin/decoder.hpp"
#include "tactwin/encoding.hpp"
#include "tactwin/loss.hpp"

namespace tactwin {

/// Window statistics per grid cell: mean |d|, mean d^2 and mean |grad d| over
/// a square window centred on the cell, plus their square roots.
struct FeatureParams {
  std::vector<double> window_half_sizes{1.0, 2.0, 4.0, 8.0, 16.0};  // mm

  void validate() const;
  std::size_t dim() const { return 6 * window_half_sizes.size(); }
};

/// Row-major [cells x params.dim()] feature matrix of a deviation map.
std::vector<double> cell_features(const DeviationMap& dev, const RegionGrid& grid,
                                  const FeatureParams& params);

struct ToySample {
  std::vector<double> features;  // [cells x dim]
  std::vector<LossTarget> targets;
};

struct ToyDataset {
  RegionGrid grid;
  double scale = 0.05;
  std::size_t dim = 0;
  std::size_t classes = 1;
  std::vector<ToySample> samples;

  void validate() const;
};

/// y = W [x; 1] with W stored row-major, bias in the last column.
struct AffineMap {
  std::size_t outputs = 0;
  std::size_t inputs = 0;
  std::vector<double> weights;

  AffineMap() = default;
  AffineMap(std::size_t out, std::size_t in) : outputs(out), inputs(in), weights(out * (in + 1), 0.0) {}

  double& bias(std::size_t o) { return weights[o * (inputs + 1) + inputs]; }
  double apply(std::size_t o, const float* x) const;
};

/// x -> L^-1 (x - mean), with L the Cholesky factor of a feature covariance.
struct Whitening {
  std::vector<double> mean;    // [dim]
  std::vector<double> matrix;  // [dim x dim], lower triangular

  std::size_t dim() const { return mean.size(); }
  void apply(const double* x, float* out) const;
  /// Row-wise over a [rows x dim] matrix.
  std::vector<float> apply_all(const std::vector<double>& features) const;
};

/// Linear head over whitened cell features. Objectness reads features
/// whitened over every cell; the other channels read features whitened over
/// positive cells. Probability channels go through a logistic sigmoid; force
/// and box channels are affine.
struct ToyHead {
  static constexpr int kVersion = 1;

  std::size_t dim = 0;
  std::size_t classes = 1;
  Whitening obj_input;
  Whitening pos_input;
  AffineMap obj, cls, csl, force, box;
  std::size_t epochs_trained = 0;

  /// Dense prediction over every cell.
  PredictionField predict(const std::vector<double>& features, std::size_t cells) const;
};

struct ToyHyperParams {
  double learning_rate = 0.5;
  int epochs = 200;
  int divergence_patience = 5;
  double divergence_factor = 10.0;  // of the first-epoch loss
  int threads = 0;
  LossParams loss;

  void validate() const;
};

/// Assignment of `targets` against an uninformed prediction field: all
/// probabilities 0.5, boxes of size `prior_wh` centred on each cell.
Assignment prior_assignment(const std::vector<LossTarget>& targets, const RegionGrid& grid,
                            double scale, std::size_t classes, Vec2 prior_wh,
                            const LossParams& params);

/// Mean target box size over the dataset.
Vec2 prior_box_size(const ToyDataset& data);

/// Whitening from all cells (objectness) and from the positive cells of the
/// prior assignment (other channels); biases start at the prior positive
/// rate, mean force and mean box size.
ToyHead init_toy_head(const ToyDataset& data, const LossParams& params);

struct TrainResult {
  std::vector<LossBreakdown> curve;  // loss before each update
  bool diverged = false;
};

/// Full-batch gradient descent on the summed total_loss of the dataset. The
/// assignment is the prior assignment, so resuming from a saved head
/// continues the same objective. Each channel steps by learning_rate / L,
/// where L bounds the curvature of its term: c * lambda_max(sum [x;1][x;1]^T)
/// over the rows it reads, c = 1/4 for sigmoid channels and 1 for force and
/// box. learning_rate <= 1 therefore descends on every convex term. The box
/// term is not smooth at IoU = 1, so its step is halved within each epoch
/// until that term does not increase. Stops early, flagged as diverged, when
/// the loss rises for divergence_patience consecutive epochs or exceeds
/// divergence_factor times the first-epoch loss.
TrainResult fit_toy_head(ToyHead& head, const ToyDataset& data, const ToyHyperParams& hyper);

/// Loss of the head on a dataset under the prior assignment.
LossBreakdown evaluate_toy_head(const ToyHead& head, const ToyDataset& data, const LossParams& params,
                                int threads = 0);

struct ToyDetection {
  std::size_t cell = 0;
  double objectness = 0.0;
  std::size_t class_index = 0;
  double force = 0.0;
  OrientedBox box;
};

/// Reads the cell with the highest objectness (ties to the lowest index).
ToyDetection toy_infer(const ToyHead& head, const std::vector<double>& features,
                       const RegionGrid& grid, double scale);

void save_toy_head(const ToyHead& head, const std::filesystem::path& path);
ToyHead load_toy_head(const std::filesystem::path& path);

}  // namespace tactwin
