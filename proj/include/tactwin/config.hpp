#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tactwin/dataset.hpp"
#include "tactwin/decoder.hpp"
#include "tactwin/loss.hpp"
#include "tactwin/pipeline.hpp"
#include "tactwin/resolution.hpp"
#include "tactwin/serialize.hpp"
#include "tactwin/toy_head.hpp"

namespace tactwin {

/// Every parameter a command may read. `seed`, `noise_sigma`, `loss` and
/// `threads` are the single source for the copies nested in the other blocks;
/// resolve() propagates them. to_json leaves out `threads`, which never
/// changes results.
struct RunConfig {
  SimParams sim;
  DecoderParams decoder;
  LossParams loss;
  FeatureParams features;
  ToyHyperParams toy;
  DatasetSpec dataset;
  RoundTripSpec roundtrip;
  ResolutionParams resolution;
  int resolution_k_min = -6;
  int resolution_k_max = 24;
  double calibration_step = 0.25;  // N
  double noise_sigma = 0.0;        // intensity units
  std::uint64_t seed = 0;
  int threads = 0;

  RunConfig();

  void resolve();
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

Json to_json(const RunConfig& c);

/// Overlays `j` onto `out`. Unknown keys, and the nested copies that resolve()
/// owns (dataset.seed, decoder.noise_sigma, ...), are rejected.
void merge_json(const Json& j, RunConfig& out);

/// Defaults overlaid with the JSON file at `path`; I/O problems raise IoError,
/// malformed content ConfigError.
RunConfig load_config(const std::filesystem::path& path);

/// Writes `to_json(c)` to `dir`/effective_config.json.
void write_effective_config(const RunConfig& c, const std::filesystem::path& dir);

}  // namespace tactwin
