#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaforge/data.hpp"
#include "semaforge/forensics/detector.hpp"
#include "semaforge/forensics/robustness.hpp"
#include "semaforge/gan/model.hpp"
#include "semaforge/manipulation.hpp"
#include "semaforge/metrics.hpp"
#include "semaforge/training.hpp"

namespace semaforge {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | stub-tiles | maps
  int count = 8;
  int size = 64;
  double val_fraction = 0.1;
  std::vector<City> cities;
  int perturbations = 10;
  double radius_miles = 5.0;
  int zoom = 17;
  CurationConfig curation;
};

struct MetricsConfig {
  metrics::PatchProtocol protocol;
  std::string embedder = "random-conv";  // or a TorchScript module path
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8787;
  std::filesystem::path checkpoints = "checkpoints";
  std::filesystem::path detector;  // detector checkpoint directory
  std::filesystem::path ui;        // static assets served under /ui
  std::size_t max_body_bytes = 16u << 20;
};

/// A detector taking part in a robustness benchmark: either a saved
/// checkpoint or a training config run on the synthetic patch task.
struct BenchDetector {
  std::string label;
  std::filesystem::path checkpoint;
  std::optional<forensics::DetectorConfig> train;
};

struct RobustnessConfig {
  /// Empty selects plain, BaRT and adversarial detectors trained inline.
  std::vector<BenchDetector> detectors;
  std::string eval = "synthetic";  // synthetic | forgeries
  int per_class = 400;
  int patch = 16;
  double val_fraction = 0.25;
  std::vector<std::filesystem::path> forgeries;  // forge output directories
  std::vector<std::filesystem::path> pristine;   // extra pristine PNGs
  std::vector<forensics::TransformGrid> grids;   // empty selects the default sweep
  std::filesystem::path out = "robustness";
};

/// Project file. Every section is optional; unknown keys anywhere are
/// rejected. Relative paths resolve against the file's directory.
struct ProjectConfig {
  std::filesystem::path dataset_root;
  gan::Architecture architecture = gan::Architecture::cyclegan;
  gan::Profile profile = gan::Profile::toy;
  std::uint64_t seed = 0;
  DataConfig data;
  training::TrainConfig training;
  std::vector<training::TrainConfig> stages;  // pix2pixHD schedule; empty = single
  manip::BlendConfig blend;
  forensics::DetectorConfig detector;
  MetricsConfig metrics;
  ServiceConfig service;
  RobustnessConfig robustness;

  static ProjectConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static ProjectConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Checks that `dataset_root` exists when set.
  void validate_paths() const;
};

/// Throws ValidationError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const std::string& section);

}  // namespace semaforge
