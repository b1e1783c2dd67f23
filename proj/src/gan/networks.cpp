#include "semaforge/gan/networks.hpp"

#include <algorithm>

#include "semaforge/error.hpp"

namespace semaforge::gan {

namespace nn = torch::nn;

const char* to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::cyclegan_resnet: return "cyclegan-resnet";
    case GeneratorKind::pix2pixhd_global: return "pix2pixhd-global";
    case GeneratorKind::pix2pixhd_local_enhancer: return "pix2pixhd-local-enhancer";
  }
  return "unknown";
}

GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "cyclegan-resnet") return GeneratorKind::cyclegan_resnet;
  if (s == "pix2pixhd-global") return GeneratorKind::pix2pixhd_global;
  if (s == "pix2pixhd-local-enhancer") return GeneratorKind::pix2pixhd_local_enhancer;
  throw InvalidArgument("unknown generator kind '" + s + "'");
}

void validate(const GeneratorSpec& spec) {
  if (spec.in_channels < 1 || spec.out_channels < 1 || spec.base_width < 1 || spec.n_resnet_blocks < 0 ||
      spec.downsample_levels < 0) {
    throw InvalidArgument("invalid generator spec");
  }
}

void validate(const DiscriminatorSpec& spec) {
  if (spec.n_layers < 1 || spec.scales < 1 || spec.in_channels < 1 || spec.base_width < 1) {
    throw InvalidArgument("invalid discriminator spec");
  }
}

namespace {

nn::InstanceNorm2d instance_norm(int channels) { return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels)); }

nn::Conv2d conv(int in, int out, int k, int stride = 1, int pad = 0) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad));
}

nn::ConvTranspose2d upconv(int in, int out) {
  return nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1));
}

nn::ReflectionPad2d reflect(int p) { return nn::ReflectionPad2d(nn::ReflectionPad2dOptions(p)); }

}  // namespace

ResnetBlockImpl::ResnetBlockImpl(int channels) {
  body = register_module("body", nn::Sequential(reflect(1), conv(channels, channels, 3), instance_norm(channels),
                                                nn::ReLU(), reflect(1), conv(channels, channels, 3),
                                                instance_norm(channels)));
}

torch::Tensor ResnetBlockImpl::forward(const torch::Tensor& x) { return x + body->forward(x); }

ResnetGeneratorImpl::ResnetGeneratorImpl(const GeneratorSpec& s) : spec(s) {
  validate(spec);
  const int w = spec.base_width;
  nn::Sequential t(reflect(3), conv(spec.in_channels, w, 7), instance_norm(w), nn::ReLU());
  for (int i = 0; i < spec.downsample_levels; ++i) {
    const int c = w << i;
    t->push_back(conv(c, 2 * c, 3, 2, 1));
    t->push_back(instance_norm(2 * c));
    t->push_back(nn::ReLU());
  }
  const int inner = w << spec.downsample_levels;
  for (int i = 0; i < spec.n_resnet_blocks; ++i) t->push_back(ResnetBlock(inner));
  for (int i = spec.downsample_levels; i > 0; --i) {
    const int c = w << i;
    t->push_back(upconv(c, c / 2));
    t->push_back(instance_norm(c / 2));
    t->push_back(nn::ReLU());
  }
  trunk = register_module("trunk", t);
  head = register_module("head", nn::Sequential(reflect(3), conv(w, spec.out_channels, 7)));
}

torch::Tensor ResnetGeneratorImpl::features(const torch::Tensor& x) { return trunk->forward(x); }

torch::Tensor ResnetGeneratorImpl::logits(const torch::Tensor& x) { return head->forward(trunk->forward(x)); }

torch::Tensor ResnetGeneratorImpl::forward(const torch::Tensor& x) { return torch::tanh(logits(x)); }

LocalEnhancerImpl::LocalEnhancerImpl(const GeneratorSpec& s) : spec(s) {
  validate(spec);
  const int w = spec.base_width;
  front = register_module("front", nn::Sequential(reflect(3), conv(spec.in_channels, w, 7), instance_norm(w),
                                                  nn::ReLU(), conv(w, 2 * w, 3, 2, 1), instance_norm(2 * w),
                                                  nn::ReLU()));
  nn::Sequential b;
  for (int i = 0; i < spec.n_resnet_blocks; ++i) b->push_back(ResnetBlock(2 * w));
  b->push_back(upconv(2 * w, w));
  b->push_back(instance_norm(w));
  b->push_back(nn::ReLU());
  b->push_back(reflect(3));
  b->push_back(conv(w, spec.out_channels, 7));
  back = register_module("back", b);
}

void LocalEnhancerImpl::zero_output_layer() {
  torch::NoGradGuard guard;
  auto& last = *back->ptr(back->size() - 1)->as<nn::Conv2d>();
  last.weight.zero_();
  last.bias.zero_();
}

torch::Tensor LocalEnhancerImpl::forward(const torch::Tensor& x, const torch::Tensor& global_features) {
  auto f = front->forward(x);
  if (f.sizes() != global_features.sizes()) {
    throw ShapeError("local enhancer: global features do not match the downsampled front-end");
  }
  return back->forward(f + global_features);
}

Pix2pixHDGeneratorImpl::Pix2pixHDGeneratorImpl(const GeneratorSpec& global_spec, const GeneratorSpec& local_spec) {
  if (global_spec.base_width != 2 * local_spec.base_width) {
    throw InvalidArgument("global generator width must be twice the local enhancer width");
  }
  global = register_module("global_generator", ResnetGenerator(global_spec));
  local = register_module("local_enhancer", LocalEnhancer(local_spec));
}

torch::Tensor Pix2pixHDGeneratorImpl::forward_global(const torch::Tensor& x_half) { return global->forward(x_half); }

namespace {

torch::Tensor upsample2(const torch::Tensor& x) {
  namespace F = torch::nn::functional;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

torch::Tensor half_of(const torch::Tensor& x) {
  if (x.size(-1) % 2 != 0 || x.size(-2) % 2 != 0) throw ShapeError("pix2pixHD input must have even dimensions");
  return torch::avg_pool2d(x, 2, 2);
}

}  // namespace

torch::Tensor Pix2pixHDGeneratorImpl::forward_global_upsampled(const torch::Tensor& x) {
  return torch::tanh(upsample2(global->logits(half_of(x))));
}

torch::Tensor Pix2pixHDGeneratorImpl::forward(const torch::Tensor& x) {
  const auto features = global->features(half_of(x));
  const auto coarse = upsample2(global->head->forward(features));
  return torch::tanh(coarse + local->forward(x, features));
}

std::pair<GeneratorSpec, GeneratorSpec> pix2pixhd_specs(int in_channels, int out_channels, int base_width,
                                                        int n_resnet_blocks_global, int n_resnet_blocks_local) {
  GeneratorSpec global{GeneratorKind::pix2pixhd_global, in_channels, out_channels, 2 * base_width,
                       n_resnet_blocks_global, 2};
  GeneratorSpec local{GeneratorKind::pix2pixhd_local_enhancer, in_channels, out_channels, base_width,
                      n_resnet_blocks_local, 1};
  return {global, local};
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const DiscriminatorSpec& s) : spec(s) {
  validate(spec);
  const int w = spec.base_width;
  int prev = w;
  blocks.push_back(nn::Sequential(conv(spec.in_channels, w, 4, 2, 2), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  for (int n = 1; n < spec.n_layers; ++n) {
    const int nf = std::min(w << n, 8 * w);
    blocks.push_back(nn::Sequential(conv(prev, nf, 4, 2, 2), instance_norm(nf),
                                    nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
    prev = nf;
  }
  const int nf = std::min(prev * 2, 8 * w);
  blocks.push_back(nn::Sequential(conv(prev, nf, 4, 1, 2), instance_norm(nf),
                                  nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
  blocks.push_back(nn::Sequential(conv(nf, 1, 4, 1, 2)));
  for (std::size_t i = 0; i < blocks.size(); ++i) register_module("block" + std::to_string(i), blocks[i]);
}

DiscriminatorOutput PatchDiscriminatorImpl::forward_features(const torch::Tensor& x) {
  if (x.size(-1) < min_input_size() || x.size(-2) < min_input_size()) {
    throw ShapeError("discriminator input smaller than " + std::to_string(min_input_size()) + " pixels");
  }
  DiscriminatorOutput out;
  auto h = x;
  for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
    h = blocks[i]->forward(h);
    out.features.push_back(h);
  }
  out.probability = torch::sigmoid(blocks.back()->forward(h));
  return out;
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) { return forward_features(x).probability; }

std::int64_t parameter_count(nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

void set_requires_grad(nn::Module& module, bool flag) {
  for (auto& p : module.parameters()) p.set_requires_grad(flag);
}

void init_weights(nn::Module& module) {
  torch::NoGradGuard guard;
  module.apply([](nn::Module& m) {
    if (auto* c = m.as<nn::Conv2d>()) {
      nn::init::normal_(c->weight, 0.0, 0.02);
      if (c->bias.defined()) nn::init::zeros_(c->bias);
    } else if (auto* t = m.as<nn::ConvTranspose2d>()) {
      nn::init::normal_(t->weight, 0.0, 0.02);
      if (t->bias.defined()) nn::init::zeros_(t->bias);
    } else if (auto* b = m.as<nn::BatchNorm2d>()) {
      nn::init::normal_(b->weight, 1.0, 0.02);
      nn::init::zeros_(b->bias);
    }
  });
}

}  // namespace semaforge::gan
