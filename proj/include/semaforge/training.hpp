#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaforge/data.hpp"
#include "semaforge/gan/model.hpp"

namespace semaforge::training {

enum class Stage { single, global_only, local_only, joint };

const char* to_string(Stage stage);
Stage stage_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 1;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  Stage stage = Stage::single;
  /// Stop once the mean train-pair SSIM reaches this value.
  double memorization_target = 0.6;
  /// Save a checkpoint every N epochs into `checkpoint_dir` (0 disables).
  int checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  /// When set, the learning rate decays linearly to zero from this epoch on.
  std::optional<int> decay_from;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  int epoch = 0;  // 1-based within its stage
  Stage stage = Stage::single;
  std::map<std::string, double> terms;  // batch means
  double ssim = 0.0;                    // mean train-pair SSIM after the epoch
};

struct StageBoundary {
  Stage stage = Stage::single;
  std::size_t first_epoch = 0;  // index into history
  std::size_t epochs_run = 0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::vector<StageBoundary> stages;
  /// Terms from one evaluation pass over the data with the final weights.
  std::map<std::string, double> final_terms;
  double initial_ssim = 0.0;
  double final_ssim = 0.0;
  bool reached_target = false;
  double wall_seconds = 0.0;
  std::vector<std::string> checkpoints;

  nlohmann::json to_json(bool deterministic = false) const;
};

/// Optimizes the model's full objective on paired samples until `epochs`
/// have run or the train-pair SSIM target is met. On a non-finite loss the
/// parameters are rolled back to the start of the failing epoch and a
/// DomainError is thrown.
TrainReport finetune(gan::TranslatorModel& model, const std::vector<PairedSample>& data, const TrainConfig& cfg);

/// pix2pixHD coarse-to-fine schedule. Stages must appear in the order
/// global-only, local-only, joint (any may be omitted).
TrainReport train_staged(gan::TranslatorModel& model, const std::vector<PairedSample>& data,
                         const std::vector<TrainConfig>& stages);

void validate_stage_order(const std::vector<TrainConfig>& stages);

/// Map -> image in inference mode. Classes outside the model palette are
/// logged and passed through.
ImageTile generate(gan::TranslatorModel& model, const SemanticMap& map);

/// Image -> map-side raster (palette-colored RGB); CycleGAN only.
Image generate_map(gan::TranslatorModel& model, const ImageTile& image);

/// Mean SSIM between generate(map) and the paired image.
double train_pair_ssim(gan::TranslatorModel& model, const std::vector<PairedSample>& data);

}  // namespace semaforge::training
