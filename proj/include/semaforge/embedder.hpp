#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <memory>

#include "semaforge/metrics.hpp"

namespace semaforge::metrics {

/// Two strided 3x3 convolutions with fixed pseudo-random weights, ReLU, then
/// per-channel mean and standard deviation. Needs no pretrained download.
class RandomConvEmbedder : public Embedder {
 public:
  explicit RandomConvEmbedder(std::uint64_t seed = 7, int width = 32);
  int dimension() const override { return 2 * width_; }
  FeatureMatrix embed(std::span<const Image> patches) override;

 private:
  int width_;
  torch::Tensor w1_, w2_;
};

/// A TorchScript feature extractor (e.g. an exported Inception-v3 pool layer).
/// Patches are resized bilinearly to `input_size` and mapped to [-1, 1].
class TorchScriptEmbedder : public Embedder {
 public:
  TorchScriptEmbedder(const std::filesystem::path& module_path, int input_size = 299);
  ~TorchScriptEmbedder() override;
  int dimension() const override;
  FeatureMatrix embed(std::span<const Image> patches) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Embedder> make_embedder(const std::string& name, std::uint64_t seed = 7);

}  // namespace semaforge::metrics
