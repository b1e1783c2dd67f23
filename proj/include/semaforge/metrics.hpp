#pragma once

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaforge/raster.hpp"

namespace semaforge::metrics {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double dynamic_range = 1.0;  // L
};

/// Gaussian-windowed SSIM averaged over all valid window positions and over
/// channels. Rasters smaller than the window use a window of min(H, W).
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

/// Rows are samples, columns feature dimensions.
using FeatureMatrix = Eigen::MatrixXd;

/// Fréchet distance between Gaussian fits (covariance with 1/(n-1)).
double fid(const FeatureMatrix& a, const FeatureMatrix& b);

/// Unbiased MMD^2 with k(x, y) = (x.y / d + 1)^3.
double kid(const FeatureMatrix& a, const FeatureMatrix& b);

/// Maps equal-sized patches to fixed-length feature vectors.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dimension() const = 0;
  virtual FeatureMatrix embed(std::span<const Image> patches) = 0;
};

struct PatchProtocol {
  int patch = 64;
  int stride = 32;
  /// A patch participates when at least this fraction of its pixels lies
  /// outside the exclusion mask; 1.0 drops any patch touching the mask.
  double min_clean_fraction = 1.0;
  int n_examples = 20;
};

/// Origins of patches that pass the exclusion rule.
std::vector<std::pair<int, int>> qualifying_patches(const BinaryMask& exclusion, const PatchProtocol& protocol);

struct MetricReport {
  double fid = 0.0;
  double kid = 0.0;
  double ssim = 0.0;
  std::size_t n_patches = 0;
  bool empty = false;
  PatchProtocol protocol;

  nlohmann::json to_json() const;
};

/// Co-located pristine/generated patch pairs outside the exclusion mask:
/// SSIM averaged over pairs, FID/KID between the two feature sets.
MetricReport evaluate_pairs(const Image& pristine, const Image& generated, const BinaryMask& exclusion,
                            const PatchProtocol& protocol, Embedder& embedder);

/// Same protocol pooled over several image triples.
MetricReport evaluate_dataset(std::span<const Image> pristine, std::span<const Image> generated,
                              std::span<const BinaryMask> exclusion, const PatchProtocol& protocol,
                              Embedder& embedder);

}  // namespace semaforge::metrics
