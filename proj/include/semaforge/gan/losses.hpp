#pragma once

#include <torch/torch.h>

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "semaforge/gan/networks.hpp"

// Loss terms of the CycleGAN and pix2pixHD objectives as free functions over
// mappings, so they can be checked against hand-computed values with stub
// networks as well as driven by the real modules during training.
namespace semaforge::gan {

using Mapping = std::function<torch::Tensor(const torch::Tensor&)>;
using TappedDiscriminator = std::function<DiscriminatorOutput(const torch::Tensor&)>;

enum class AdversarialMode { log, least_squares };

const char* to_string(AdversarialMode mode);
AdversarialMode adversarial_mode_from_string(const std::string& s);

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct LossWeights {
  double lambda_cycle = 10.0;
  double lambda_identity = 5.0;
  double lambda_fm = 10.0;
};

void validate(const LossWeights& weights);

struct AdversarialLoss {
  torch::Tensor d_loss;  // -E[log D(real)] - E[log(1 - D(fake))]
  torch::Tensor g_loss;  // -E[log D(fake)], non-saturating
};

/// Raises DomainError for values outside [0, 1] (or NaN), then clamps.
torch::Tensor checked_probability(const torch::Tensor& p);

torch::Tensor discriminator_loss(const torch::Tensor& p_real, const torch::Tensor& p_fake,
                                 AdversarialMode mode = AdversarialMode::log);
torch::Tensor generator_loss(const torch::Tensor& p_fake, AdversarialMode mode = AdversarialMode::log);

/// Unconditional adversarial loss. D maps a raster batch to a per-patch
/// probability map; expectations are means over batch and patches.
AdversarialLoss gan_loss(const Mapping& D, const torch::Tensor& real, const torch::Tensor& fake,
                         AdversarialMode mode = AdversarialMode::log);

/// Mean absolute difference; ShapeError if shapes differ.
torch::Tensor l1_mean(const torch::Tensor& a, const torch::Tensor& b);

/// mean|F(G(x)) - x| + mean|G(F(y)) - y|
torch::Tensor cycle_consistency_loss(const Mapping& G, const Mapping& F, const torch::Tensor& x,
                                     const torch::Tensor& y);

/// mean|F(x) - x| + mean|G(y) - y|
torch::Tensor identity_loss(const Mapping& G, const Mapping& F, const torch::Tensor& x, const torch::Tensor& y);

struct CycleGanNetworks {
  Mapping G;    // x -> y
  Mapping F;    // y -> x
  Mapping D_x;  // judges the x domain
  Mapping D_y;  // judges the y domain
};

struct CycleGanObjective {
  torch::Tensor adversarial_xy;            // L_GAN(G, D_y), discriminator form
  torch::Tensor adversarial_yx;            // L_GAN(F, D_x), discriminator form
  torch::Tensor generator_adversarial_xy;  // non-saturating G term
  torch::Tensor generator_adversarial_yx;  // non-saturating F term
  torch::Tensor cycle;
  torch::Tensor identity;
  /// adversarial_xy + adversarial_yx + lambda_cycle*cycle + lambda_identity*identity
  torch::Tensor total;
  /// What the generators minimize: the non-saturating adversarial terms plus
  /// the same weighted cycle and identity terms.
  torch::Tensor generator_total;
  torch::Tensor fake_y;  // G(x)
  torch::Tensor fake_x;  // F(y)

  std::map<std::string, double> values() const;
};

CycleGanObjective cyclegan_objective(const CycleGanNetworks& nets, const LossWeights& weights,
                                     const torch::Tensor& x, const torch::Tensor& y,
                                     AdversarialMode mode = AdversarialMode::log);

/// Average pooling by an integer factor; dimensions must be divisible.
torch::Tensor downsample_area(const torch::Tensor& x, int factor);

/// Pads bottom/right to the next multiple, reflecting (replicating where the
/// raster is too small to reflect).
torch::Tensor pad_to_multiple(const torch::Tensor& x, int multiple);

/// {x, x/2, x/4, ...} after padding to a multiple of 2^(scales-1).
std::vector<torch::Tensor> image_pyramid(const torch::Tensor& x, int scales);

struct MultiscaleTerms {
  std::vector<AdversarialLoss> per_scale;  // scale k sees 2^k downsampled inputs
  AdversarialLoss sum;
};

/// Conditional multi-scale adversarial terms with a precomputed fake. D_k
/// receives channel-concatenated (map, image) pairs at its scale.
MultiscaleTerms multiscale_gan_terms(const std::vector<Mapping>& Ds, const torch::Tensor& map,
                                     const torch::Tensor& real, const torch::Tensor& fake,
                                     AdversarialMode mode = AdversarialMode::log);

AdversarialLoss multiscale_gan_objective(const Mapping& G, const std::vector<Mapping>& Ds, const torch::Tensor& map,
                                         const torch::Tensor& image, AdversarialMode mode = AdversarialMode::log);

/// sum_i (1/N_i) * ||real_i - fake_i||_1 averaged over the batch, N_i being the
/// per-sample element count of tap i. Real features are treated as targets.
torch::Tensor feature_matching_loss(const std::vector<torch::Tensor>& real_features,
                                    const std::vector<torch::Tensor>& fake_features);

torch::Tensor feature_matching_loss(const Mapping& G, const TappedDiscriminator& D, const torch::Tensor& map,
                                    const torch::Tensor& real);

struct Pix2pixHDObjective {
  torch::Tensor adversarial;       // generator side, summed over scales
  torch::Tensor feature_matching;  // summed over scales
  torch::Tensor discriminator;     // discriminator side on a detached fake
  torch::Tensor total;             // adversarial + lambda_fm * feature_matching

  std::map<std::string, double> values() const;
};

/// Objective given a precomputed fake (so training can reuse G's output).
Pix2pixHDObjective pix2pixhd_terms(const std::vector<TappedDiscriminator>& Ds, const LossWeights& weights,
                                   const torch::Tensor& map, const torch::Tensor& image, const torch::Tensor& fake,
                                   AdversarialMode mode = AdversarialMode::log);

Pix2pixHDObjective pix2pixhd_objective(const Mapping& G, const std::vector<TappedDiscriminator>& Ds,
                                       const LossWeights& weights, const torch::Tensor& map,
                                       const torch::Tensor& image, AdversarialMode mode = AdversarialMode::log);

/// Mean of a per-patch probability map.
double patchgan_score(const torch::Tensor& probability_map);
/// Runs D and averages its map; ShapeError when the raster is smaller than
/// the discriminator accepts.
double patchgan_score(PatchDiscriminator& D, const torch::Tensor& raster);

}  // namespace semaforge::gan
