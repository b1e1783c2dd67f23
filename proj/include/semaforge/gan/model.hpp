#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaforge/gan/losses.hpp"
#include "semaforge/gan/networks.hpp"
#include "semaforge/raster.hpp"

namespace semaforge::gan {

enum class Architecture { cyclegan, pix2pixhd };
enum class Profile { toy, full };

const char* to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);
const char* to_string(Profile p);
Profile profile_from_string(const std::string& s);

/// Portable description of a translator; serialized as `spec.json` in a
/// checkpoint directory next to the parameter blobs.
struct ModelSpec {
  Architecture architecture = Architecture::cyclegan;
  Profile profile = Profile::toy;
  int tile_size = 64;
  GeneratorSpec generator;         // G and F (CycleGAN) or the local enhancer G2
  GeneratorSpec global_generator;  // pix2pixHD G1 only
  DiscriminatorSpec discriminator;
  LossWeights loss_weights;
  AdversarialMode adversarial_mode = AdversarialMode::log;
  Palette palette = Palette::default_map_palette();

  /// Default architecture for a profile. Toy: width 16, 2 residual blocks,
  /// 64 px tiles. Full: the upstream widths and block counts.
  static ModelSpec make(Architecture arch, Profile profile, int tile_size = 0,
                        Palette palette = Palette::default_map_palette());

  void validate() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

/// Maps render as palette colors; both maps and images enter the networks as
/// 1xCxHxW tensors in [-1, 1].
torch::Tensor map_to_tensor(const SemanticMap& map);
torch::Tensor image_to_tensor(const Image& image);
Image tensor_to_image(const torch::Tensor& t);
torch::Tensor stack_maps(const std::vector<const SemanticMap*>& maps);
torch::Tensor stack_images(const std::vector<const Image*>& images);

/// Generator/discriminator ensemble. Module handles are shared on copy; use
/// `snapshot`/`restore` for value copies of the parameters.
class TranslatorModel {
 public:
  explicit TranslatorModel(ModelSpec spec, std::uint64_t seed = 0);

  const ModelSpec& spec() const { return spec_; }
  Architecture architecture() const { return spec_.architecture; }

  // CycleGAN
  ResnetGenerator& g() { return g_; }
  ResnetGenerator& f() { return f_; }
  PatchDiscriminator& d_x() { return d_x_; }
  PatchDiscriminator& d_y() { return d_y_; }

  // pix2pixHD
  Pix2pixHDGenerator& hd_generator() { return hd_; }
  std::vector<PatchDiscriminator>& hd_discriminators() { return hd_ds_; }

  /// Map -> image direction (G, or G1∘G2).
  torch::Tensor translate(const torch::Tensor& map);
  /// Image -> map direction; CycleGAN only.
  torch::Tensor translate_back(const torch::Tensor& image);

  std::vector<torch::Tensor> generator_parameters();
  std::vector<torch::Tensor> discriminator_parameters();
  std::vector<torch::Tensor> all_parameters();

  CycleGanNetworks cyclegan_networks();
  std::vector<TappedDiscriminator> tapped_discriminators();

  void train(bool on);

  std::vector<torch::Tensor> snapshot();
  void restore(const std::vector<torch::Tensor>& params);

  void save(const std::filesystem::path& dir) const;
  static TranslatorModel load(const std::filesystem::path& dir);

 private:
  std::vector<std::pair<std::string, torch::nn::Module*>> modules() const;

  ModelSpec spec_;
  ResnetGenerator g_{nullptr}, f_{nullptr};
  PatchDiscriminator d_x_{nullptr}, d_y_{nullptr};
  Pix2pixHDGenerator hd_{nullptr};
  std::vector<PatchDiscriminator> hd_ds_;
};

/// Directory names under `root` holding a `spec.json`, sorted.
std::vector<std::string> list_checkpoints(const std::filesystem::path& root);

}  // namespace semaforge::gan
