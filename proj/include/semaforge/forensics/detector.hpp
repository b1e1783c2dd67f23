#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaforge/data.hpp"
#include "semaforge/forensics/transforms.hpp"
#include "semaforge/gan/model.hpp"

namespace semaforge::forensics {

enum class TrainingMode { plain, bart, adversarial };
const char* to_string(TrainingMode mode);
TrainingMode training_mode_from_string(const std::string& s);

struct DetectorSpec {
  gan::Profile profile = gan::Profile::toy;
  int patch_size = 64;
  TrainingMode mode = TrainingMode::plain;

  nlohmann::json to_json() const;
  static DetectorSpec from_json(const nlohmann::json& j);
};

/// Residual patch classifier returning one logit per patch. Inputs are unit
/// range NCHW tensors. Toy: a 3x3 stem and three basic blocks (8 weight
/// layers). Full: 50-layer bottleneck network with a stride-1 3x3 stem and no
/// max-pool, suited to 64 px patches.
struct DetectorNetImpl : torch::nn::Module {
  explicit DetectorNetImpl(gan::Profile profile);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential body{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(DetectorNet);

class DetectorModel {
 public:
  explicit DetectorModel(DetectorSpec spec, std::uint64_t seed = 0);

  const DetectorSpec& spec() const { return spec_; }
  DetectorNet& net() { return net_; }

  /// P(generated) per patch, evaluated in inference mode.
  std::vector<double> probabilities(std::span<const Image> patches, int batch_size = 256);
  torch::Tensor logits(const torch::Tensor& x);

  void save(const std::filesystem::path& dir) const;
  static DetectorModel load(const std::filesystem::path& dir);

 private:
  DetectorSpec spec_;
  DetectorNet net_{nullptr};
};

/// Unit-range NCHW batch.
torch::Tensor patches_to_tensor(std::span<const Image> patches);

struct PgdConfig {
  double epsilon = 1.0 / 255.0;  // unit scale
  int steps = 5;
  double step_size = 0.0;  // 0 selects epsilon / 3
  bool random_start = true;
};

/// Projects `x_adv` onto the L-inf ball of radius `epsilon` around `x` and onto
/// [0, 1]; afterwards every |x_adv - x| <= epsilon holds in float arithmetic.
torch::Tensor project_linf(const torch::Tensor& x_adv, const torch::Tensor& x, double epsilon);

/// Projected gradient ascent on the detector's cross-entropy. 0 steps or
/// epsilon 0 returns `x` unchanged and draws no random numbers.
torch::Tensor pgd_attack(DetectorNet& net, const torch::Tensor& x, const torch::Tensor& labels,
                         const PgdConfig& cfg);

struct DetectorConfig {
  gan::Profile profile = gan::Profile::toy;
  TrainingMode mode = TrainingMode::plain;
  int epochs = 6;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// L-inf budget in 8-bit levels; converted to unit scale by dividing by 255.
  double epsilon_levels = 1.0;
  int pgd_steps = 5;
  std::vector<TransformSpec> bart = default_bart_specs();

  void validate() const;
  nlohmann::json to_json() const;
  static DetectorConfig from_json(const nlohmann::json& j);
};

struct DetectorEpoch {
  int epoch = 0;
  double loss = 0.0;
  double val_auc = 0.0;
};

struct DetectorReport {
  std::vector<DetectorEpoch> history;
  double val_auc = 0.5;
  double max_accuracy = 0.5;
  double accuracy = 0.5;  // threshold 0.5
  /// Largest |delta| over every adversarial batch (0 outside adversarial mode).
  double max_perturbation = 0.0;
  double wall_seconds = 0.0;

  nlohmann::json to_json(bool deterministic = false) const;
};

struct TrainedDetector {
  DetectorModel model;
  DetectorReport report;
};

/// Trains on the dataset's train split and reports validation metrics.
/// Throws InsufficientSamplesError when a split lacks one of the labels.
TrainedDetector train_detector(const PatchDataset& data, const DetectorConfig& cfg);

/// Evaluates a detector on labeled patches: {auc, max_accuracy, accuracy}.
struct Evaluation {
  double auc = 0.5;
  double max_accuracy = 0.5;
  double accuracy = 0.5;
};
Evaluation evaluate_detector(DetectorModel& model, std::span<const Image> patches, std::span<const int> labels);

}  // namespace semaforge::forensics
