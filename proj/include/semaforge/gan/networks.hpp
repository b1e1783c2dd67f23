#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

namespace semaforge::gan {

enum class GeneratorKind { cyclegan_resnet, pix2pixhd_global, pix2pixhd_local_enhancer };

const char* to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& s);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::cyclegan_resnet;
  int in_channels = 3;
  int out_channels = 3;
  int base_width = 16;
  int n_resnet_blocks = 2;
  int downsample_levels = 2;
};

struct DiscriminatorSpec {
  int n_layers = 3;
  int scales = 1;  // 1 for CycleGAN D_x / D_y, 3 for the pix2pixHD stack
  bool conditional = false;
  int in_channels = 3;
  int base_width = 16;
};

/// Throws InvalidArgument for non-positive sizes or widths.
void validate(const GeneratorSpec& spec);
void validate(const DiscriminatorSpec& spec);

// ---------------------------------------------------------------------------

struct ResnetBlockImpl : torch::nn::Module {
  explicit ResnetBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(ResnetBlock);

/// Encoder / residual trunk / decoder generator. Output is tanh-bounded at the
/// input resolution.
struct ResnetGeneratorImpl : torch::nn::Module {
  explicit ResnetGeneratorImpl(const GeneratorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);
  /// Output before the tanh bound.
  torch::Tensor logits(const torch::Tensor& x);

  /// Activations after the last upsampling stage (`base_width` channels),
  /// i.e. everything but the output head.
  torch::Tensor features(const torch::Tensor& x);

  GeneratorSpec spec;
  torch::nn::Sequential trunk{nullptr};
  torch::nn::Sequential head{nullptr};
};
TORCH_MODULE(ResnetGenerator);

/// pix2pixHD local enhancer G2: a full-resolution front-end downsampled once,
/// summed with the global generator's features, then residual blocks and a
/// transposed-convolution back-end at full resolution. Returns a correction
/// in pre-tanh space.
struct LocalEnhancerImpl : torch::nn::Module {
  explicit LocalEnhancerImpl(const GeneratorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& global_features);
  /// Zeroes the final convolution so a fresh enhancer adds nothing.
  void zero_output_layer();

  GeneratorSpec spec;
  torch::nn::Sequential front{nullptr};
  torch::nn::Sequential back{nullptr};
};
TORCH_MODULE(LocalEnhancer);

/// G(x) = tanh(up(G1 logits) + G2(x, G1.features(downsample(x)))). G1's own
/// head produces the half-resolution image used during global-only training;
/// the enhancer refines its upsampled logits.
struct Pix2pixHDGeneratorImpl : torch::nn::Module {
  Pix2pixHDGeneratorImpl(const GeneratorSpec& global_spec, const GeneratorSpec& local_spec);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor forward_global(const torch::Tensor& x_half);
  /// G1 alone at full resolution: the output G gives with a zeroed enhancer.
  torch::Tensor forward_global_upsampled(const torch::Tensor& x);

  ResnetGenerator global{nullptr};
  LocalEnhancer local{nullptr};
};
TORCH_MODULE(Pix2pixHDGenerator);

/// Spec pair for a pix2pixHD generator derived from the local enhancer's
/// spec. The global generator works at twice the width so its features can
/// be added to the enhancer's downsampled front-end.
std::pair<GeneratorSpec, GeneratorSpec> pix2pixhd_specs(int in_channels, int out_channels, int base_width,
                                                        int n_resnet_blocks_global, int n_resnet_blocks_local);

struct DiscriminatorOutput {
  std::vector<torch::Tensor> features;  // intermediate activations, in order
  torch::Tensor probability;            // per-patch probabilities in (0, 1)
};

/// PatchGAN discriminator: strided 4x4 convolutions with leaky ReLU, ending
/// in a one-channel sigmoid map.
struct PatchDiscriminatorImpl : torch::nn::Module {
  explicit PatchDiscriminatorImpl(const DiscriminatorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);
  DiscriminatorOutput forward_features(const torch::Tensor& x);
  int min_input_size() const { return 1 << spec.n_layers; }

  DiscriminatorSpec spec;
  std::vector<torch::nn::Sequential> blocks;
};
TORCH_MODULE(PatchDiscriminator);

std::int64_t parameter_count(torch::nn::Module& module);
void set_requires_grad(torch::nn::Module& module, bool flag);
/// N(0, 0.02) convolution weights, N(1, 0.02) norm scales; draws from the
/// global torch generator so call after torch::manual_seed.
void init_weights(torch::nn::Module& module);

}  // namespace semaforge::gan
