#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tactwin/contactsim.hpp"
#include "tactwin/random.hpp"
#include "tactwin/serialize.hpp"

namespace tactwin {

/// Distribution single-contact scenarios are drawn from.
struct ScenarioDistribution {
  std::vector<ProbeSpec> probes;  // drawn uniformly
  double force_min = 0.0;
  double force_max = 10.0;
  double position_range = 4.0;  // |x|, |y| bound of the contact centre, mm
  bool random_theta = true;     // spheres always use theta = 0
  double noise_sigma = 0.0;

  void validate(const SimParams& sim) const;
};

/// Draws probe, force, pose and position; positions whose footprint leaves
/// the active area are redrawn. Throws ScenarioError after 1000 rejections.
ContactScenario sample_scenario(const ScenarioDistribution& dist, const SimParams& sim, Rng& rng);

struct DatasetSpec {
  ScenarioDistribution scenarios;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  double test_fraction = 0.1;
  double val_fraction = 0.1;  // of the remaining train samples

  void validate(const SimParams& sim) const;
};

Json to_json(const ScenarioDistribution& d);
Json to_json(const DatasetSpec& d);
void merge_json(const Json& j, const std::string& path, ScenarioDistribution& out);
void merge_json(const Json& j, const std::string& path, DatasetSpec& out);

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split parse_split(const std::string& name);

/// Seeded permutation: the first round(test_fraction * n) indices are test,
/// the next round(val_fraction * (n - test)) are validation.
std::vector<Split> assign_splits(std::size_t count, std::uint64_t seed, double test_fraction,
                                 double val_fraction);

struct AnnotationRecord {
  std::size_t index = 0;
  Split split = Split::Train;
  std::string class_name;
  double cx_mm = 0.0;
  double cy_mm = 0.0;
  double w_mm = 0.0;
  double h_mm = 0.0;
  double theta_deg = 0.0;
  double force_n = 0.0;
  std::string probe;
  std::uint64_t seed = 0;

  GroundTruth truth() const;
  std::filesystem::path image_path() const;  // relative to the dataset root
};

Json to_json(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(const Json& j);

struct DatasetSummary {
  std::filesystem::path manifest;
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Writes `{split}/{index:06}.pgm`, annotations.jsonl, reference.pgm and
/// manifest.json under `out_dir`. Output bytes depend only on the inputs,
/// not on `threads`.
DatasetSummary generate_dataset(const DatasetSpec& spec, const SimParams& sim,
                                const std::filesystem::path& out_dir, int threads = 0);

struct LoadedDataset {
  std::filesystem::path root;
  Json manifest;
  SimParams sim;
  std::vector<std::string> classes;
  std::vector<AnnotationRecord> records;

  TactileImage image(const AnnotationRecord& r) const;
  TactileImage reference() const;
};

LoadedDataset load_dataset(const std::filesystem::path& root);

}  // namespace tactwin
