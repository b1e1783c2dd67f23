#include "semaforge/gan/losses.hpp"

#include "semaforge/error.hpp"

namespace semaforge::gan {

namespace F = torch::nn::functional;

const char* to_string(AdversarialMode mode) { return mode == AdversarialMode::log ? "log" : "least-squares"; }

AdversarialMode adversarial_mode_from_string(const std::string& s) {
  if (s == "log") return AdversarialMode::log;
  if (s == "least-squares") return AdversarialMode::least_squares;
  throw InvalidArgument("unknown adversarial mode '" + s + "'");
}

void validate(const LossWeights& w) {
  if (!(w.lambda_cycle >= 0.0 && w.lambda_identity >= 0.0 && w.lambda_fm >= 0.0)) {
    throw InvalidArgument("loss weights must be non-negative");
  }
}

torch::Tensor checked_probability(const torch::Tensor& p) {
  {
    torch::NoGradGuard guard;
    const bool bad = (p < 0).any().item<bool>() || (p > 1).any().item<bool>() || p.isnan().any().item<bool>();
    if (bad) throw DomainError("discriminator output outside [0, 1]");
  }
  return p.clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

torch::Tensor discriminator_loss(const torch::Tensor& p_real, const torch::Tensor& p_fake, AdversarialMode mode) {
  const auto r = checked_probability(p_real);
  const auto f = checked_probability(p_fake);
  if (mode == AdversarialMode::least_squares) return (r - 1).pow(2).mean() + f.pow(2).mean();
  return -torch::log(r).mean() - torch::log(1 - f).mean();
}

torch::Tensor generator_loss(const torch::Tensor& p_fake, AdversarialMode mode) {
  const auto f = checked_probability(p_fake);
  if (mode == AdversarialMode::least_squares) return (f - 1).pow(2).mean();
  return -torch::log(f).mean();
}

AdversarialLoss gan_loss(const Mapping& D, const torch::Tensor& real, const torch::Tensor& fake,
                         AdversarialMode mode) {
  const auto p_real = D(real);
  const auto p_fake = D(fake);
  return {discriminator_loss(p_real, p_fake, mode), generator_loss(p_fake, mode)};
}

torch::Tensor l1_mean(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError("L1 operands differ in shape");
  }
  return (a - b).abs().mean();
}

torch::Tensor cycle_consistency_loss(const Mapping& G, const Mapping& F, const torch::Tensor& x,
                                     const torch::Tensor& y) {
  return l1_mean(F(G(x)), x) + l1_mean(G(F(y)), y);
}

torch::Tensor identity_loss(const Mapping& G, const Mapping& F, const torch::Tensor& x, const torch::Tensor& y) {
  return l1_mean(F(x), x) + l1_mean(G(y), y);
}

std::map<std::string, double> CycleGanObjective::values() const {
  return {{"adversarial_xy", adversarial_xy.item<double>()},
          {"adversarial_yx", adversarial_yx.item<double>()},
          {"generator_adversarial_xy", generator_adversarial_xy.item<double>()},
          {"generator_adversarial_yx", generator_adversarial_yx.item<double>()},
          {"cycle", cycle.item<double>()},
          {"identity", identity.item<double>()},
          {"total", total.item<double>()},
          {"generator_total", generator_total.item<double>()}};
}

CycleGanObjective cyclegan_objective(const CycleGanNetworks& nets, const LossWeights& weights,
                                     const torch::Tensor& x, const torch::Tensor& y, AdversarialMode mode) {
  validate(weights);
  CycleGanObjective o;
  const auto fake_y = nets.G(x);
  const auto fake_x = nets.F(y);

  const auto p_real_y = nets.D_y(y);
  const auto p_fake_y = nets.D_y(fake_y);
  const auto p_real_x = nets.D_x(x);
  const auto p_fake_x = nets.D_x(fake_x);
  o.adversarial_xy = discriminator_loss(p_real_y, p_fake_y, mode);
  o.adversarial_yx = discriminator_loss(p_real_x, p_fake_x, mode);
  o.generator_adversarial_xy = generator_loss(p_fake_y, mode);
  o.generator_adversarial_yx = generator_loss(p_fake_x, mode);

  o.cycle = l1_mean(nets.F(fake_y), x) + l1_mean(nets.G(fake_x), y);
  o.identity = weights.lambda_identity > 0.0 ? identity_loss(nets.G, nets.F, x, y)
                                             : torch::zeros({}, x.options());

  const auto regularizers = weights.lambda_cycle * o.cycle + weights.lambda_identity * o.identity;
  o.total = o.adversarial_xy + o.adversarial_yx + regularizers;
  o.generator_total = o.generator_adversarial_xy + o.generator_adversarial_yx + regularizers;
  o.fake_y = fake_y;
  o.fake_x = fake_x;
  return o;
}

torch::Tensor downsample_area(const torch::Tensor& x, int factor) {
  if (factor == 1) return x;
  if (x.size(-1) % factor != 0 || x.size(-2) % factor != 0) {
    throw ShapeError("raster not divisible by downsampling factor " + std::to_string(factor));
  }
  return torch::avg_pool2d(x, factor, factor);
}

torch::Tensor pad_to_multiple(const torch::Tensor& x, int multiple) {
  const auto h = x.size(-2), w = x.size(-1);
  const auto ph = (multiple - h % multiple) % multiple;
  const auto pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return x;
  const bool can_reflect = ph < h && pw < w;
  auto options = F::PadFuncOptions({0, pw, 0, ph});
  if (can_reflect) {
    options.mode(torch::kReflect);
  } else {
    options.mode(torch::kReplicate);
  }
  return F::pad(x, options);
}

std::vector<torch::Tensor> image_pyramid(const torch::Tensor& x, int scales) {
  if (scales < 1) throw InvalidArgument("at least one scale required");
  const auto padded = pad_to_multiple(x, 1 << (scales - 1));
  std::vector<torch::Tensor> out{padded};
  for (int k = 1; k < scales; ++k) out.push_back(downsample_area(out.back(), 2));
  return out;
}

MultiscaleTerms multiscale_gan_terms(const std::vector<Mapping>& Ds, const torch::Tensor& map,
                                     const torch::Tensor& real, const torch::Tensor& fake, AdversarialMode mode) {
  if (Ds.empty()) throw InvalidArgument("at least one discriminator required");
  if (real.sizes() != fake.sizes()) throw ShapeError("real and fake rasters differ in shape");
  const int n = static_cast<int>(Ds.size());
  const auto maps = image_pyramid(map, n);
  const auto reals = image_pyramid(real, n);
  const auto fakes = image_pyramid(fake, n);
  MultiscaleTerms t;
  for (int k = 0; k < n; ++k) {
    const auto p_real = Ds[k](torch::cat({maps[k], reals[k]}, 1));
    const auto p_fake = Ds[k](torch::cat({maps[k], fakes[k]}, 1));
    t.per_scale.push_back({discriminator_loss(p_real, p_fake, mode), generator_loss(p_fake, mode)});
  }
  t.sum = t.per_scale.front();
  for (int k = 1; k < n; ++k) {
    t.sum.d_loss = t.sum.d_loss + t.per_scale[k].d_loss;
    t.sum.g_loss = t.sum.g_loss + t.per_scale[k].g_loss;
  }
  return t;
}

AdversarialLoss multiscale_gan_objective(const Mapping& G, const std::vector<Mapping>& Ds, const torch::Tensor& map,
                                         const torch::Tensor& image, AdversarialMode mode) {
  return multiscale_gan_terms(Ds, map, image, G(map), mode).sum;
}

torch::Tensor feature_matching_loss(const std::vector<torch::Tensor>& real_features,
                                    const std::vector<torch::Tensor>& fake_features) {
  if (real_features.size() != fake_features.size()) throw ShapeError("feature tap counts differ");
  if (real_features.empty()) throw InvalidArgument("feature matching needs at least one tap");
  torch::Tensor total;
  for (std::size_t i = 0; i < real_features.size(); ++i) {
    const auto& r = real_features[i];
    const auto& f = fake_features[i];
    if (r.sizes() != f.sizes()) throw ShapeError("feature tap " + std::to_string(i) + " shapes differ");
    // per-sample sum / N_i, then batch mean == mean over all elements
    const auto batch = r.dim() > 0 ? r.size(0) : 1;
    const auto n_i = static_cast<double>(r.numel() / std::max<std::int64_t>(batch, 1));
    const auto term = (f - r.detach()).abs().sum() / (n_i * static_cast<double>(batch));
    total = total.defined() ? total + term : term;
  }
  return total;
}

torch::Tensor feature_matching_loss(const Mapping& G, const TappedDiscriminator& D, const torch::Tensor& map,
                                    const torch::Tensor& real) {
  const auto fake = G(map);
  return feature_matching_loss(D(torch::cat({map, real}, 1)).features, D(torch::cat({map, fake}, 1)).features);
}

std::map<std::string, double> Pix2pixHDObjective::values() const {
  return {{"adversarial", adversarial.item<double>()},
          {"feature_matching", feature_matching.item<double>()},
          {"discriminator", discriminator.item<double>()},
          {"total", total.item<double>()}};
}

Pix2pixHDObjective pix2pixhd_terms(const std::vector<TappedDiscriminator>& Ds, const LossWeights& weights,
                                   const torch::Tensor& map, const torch::Tensor& image, const torch::Tensor& fake,
                                   AdversarialMode mode) {
  validate(weights);
  if (Ds.empty()) throw InvalidArgument("at least one discriminator required");
  if (image.sizes() != fake.sizes()) throw ShapeError("real and fake rasters differ in shape");
  const int n = static_cast<int>(Ds.size());
  const auto maps = image_pyramid(map, n);
  const auto reals = image_pyramid(image, n);
  const auto fakes = image_pyramid(fake, n);

  Pix2pixHDObjective o;
  o.adversarial = torch::zeros({}, image.options());
  o.feature_matching = torch::zeros({}, image.options());
  o.discriminator = torch::zeros({}, image.options());
  for (int k = 0; k < n; ++k) {
    const auto real_out = Ds[k](torch::cat({maps[k], reals[k]}, 1));
    const auto fake_out = Ds[k](torch::cat({maps[k], fakes[k]}, 1));
    const auto detached_out = Ds[k](torch::cat({maps[k], fakes[k].detach()}, 1));
    o.adversarial = o.adversarial + generator_loss(fake_out.probability, mode);
    o.feature_matching = o.feature_matching + feature_matching_loss(real_out.features, fake_out.features);
    o.discriminator = o.discriminator + discriminator_loss(real_out.probability, detached_out.probability, mode);
  }
  o.total = o.adversarial + weights.lambda_fm * o.feature_matching;
  return o;
}

Pix2pixHDObjective pix2pixhd_objective(const Mapping& G, const std::vector<TappedDiscriminator>& Ds,
                                       const LossWeights& weights, const torch::Tensor& map,
                                       const torch::Tensor& image, AdversarialMode mode) {
  return pix2pixhd_terms(Ds, weights, map, image, G(map), mode);
}

double patchgan_score(const torch::Tensor& probability_map) {
  if (probability_map.numel() == 0) throw ShapeError("empty probability map");
  return probability_map.to(torch::kDouble).mean().item<double>();
}

double patchgan_score(PatchDiscriminator& D, const torch::Tensor& raster) {
  torch::NoGradGuard guard;
  return patchgan_score(D->forward(raster));
}

}  // namespace semaforge::gan
