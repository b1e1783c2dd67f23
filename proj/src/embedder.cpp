#include "semaforge/embedder.hpp"

#include <torch/script.h>

#include <random>

#include "semaforge/error.hpp"
#include "semaforge/gan/model.hpp"

namespace semaforge::metrics {

namespace {

// Weights come from a local engine so embedding never touches torch's global RNG.
torch::Tensor seeded_weights(std::mt19937_64& rng, std::int64_t out, std::int64_t in) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const float scale = std::sqrt(2.0f / static_cast<float>(in * 9));
  std::vector<float> v(static_cast<std::size_t>(out * in * 9));
  for (auto& x : v) x = normal(rng) * scale;
  return torch::from_blob(v.data(), {out, in, 3, 3}, torch::kFloat32).clone();
}

torch::Tensor batch(std::span<const Image> patches) {
  std::vector<torch::Tensor> ts;
  ts.reserve(patches.size());
  for (const auto& p : patches) {
    if (!p.same_shape(patches.front())) throw ShapeError("embedder patches differ in shape");
    ts.push_back(gan::image_to_tensor(p));
  }
  return torch::cat(ts, 0);
}

FeatureMatrix to_matrix(const torch::Tensor& features) {
  const auto f = features.to(torch::kDouble).contiguous();
  FeatureMatrix m(f.size(0), f.size(1));
  auto acc = f.accessor<double, 2>();
  for (std::int64_t i = 0; i < f.size(0); ++i) {
    for (std::int64_t j = 0; j < f.size(1); ++j) m(i, j) = acc[i][j];
  }
  return m;
}

}  // namespace

RandomConvEmbedder::RandomConvEmbedder(std::uint64_t seed, int width) : width_(width) {
  if (width < 1) throw InvalidArgument("embedder width must be positive");
  std::mt19937_64 rng(seed);
  w1_ = seeded_weights(rng, width, 3);
  w2_ = seeded_weights(rng, width, width);
}

FeatureMatrix RandomConvEmbedder::embed(std::span<const Image> patches) {
  if (patches.empty()) return FeatureMatrix(0, dimension());
  torch::NoGradGuard guard;
  auto x = batch(patches);
  x = torch::relu(torch::conv2d(x, w1_, {}, 2, 1));
  x = torch::relu(torch::conv2d(x, w2_, {}, 2, 1));
  const auto flat = x.flatten(2);
  return to_matrix(torch::cat({flat.mean(2), flat.std(2, /*unbiased=*/false)}, 1));
}

struct TorchScriptEmbedder::Impl {
  torch::jit::script::Module module;
  int input_size = 299;
  int dimension = -1;
};

TorchScriptEmbedder::TorchScriptEmbedder(const std::filesystem::path& module_path, int input_size)
    : impl_(std::make_unique<Impl>()) {
  try {
    impl_->module = torch::jit::load(module_path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot load embedder module " + module_path.string() + ": " + e.what_without_backtrace());
  }
  impl_->module.eval();
  impl_->input_size = input_size;
}

TorchScriptEmbedder::~TorchScriptEmbedder() = default;

int TorchScriptEmbedder::dimension() const { return impl_->dimension; }

FeatureMatrix TorchScriptEmbedder::embed(std::span<const Image> patches) {
  if (patches.empty()) return FeatureMatrix(0, std::max(impl_->dimension, 0));
  torch::NoGradGuard guard;
  auto x = batch(patches);
  x = torch::nn::functional::interpolate(
      x, torch::nn::functional::InterpolateFuncOptions()
             .size(std::vector<std::int64_t>{impl_->input_size, impl_->input_size})
             .mode(torch::kBilinear)
             .align_corners(false));
  auto out = impl_->module.forward({x}).toTensor().flatten(1);
  impl_->dimension = static_cast<int>(out.size(1));
  return to_matrix(out);
}

std::unique_ptr<Embedder> make_embedder(const std::string& name, std::uint64_t seed) {
  if (name.empty() || name == "random-conv") return std::make_unique<RandomConvEmbedder>(seed);
  return std::make_unique<TorchScriptEmbedder>(name);
}

}  // namespace semaforge::metrics
