#pragma once

#include <functional>
#include <span>
#include <vector>

#include "semaforge/raster.hpp"

namespace semaforge::forensics {

/// Scores a batch of equal-sized patches.
using PatchScorer = std::function<std::vector<double>(std::span<const Image>)>;

struct DetectionHeatmap {
  int height = 0;
  int width = 0;
  std::vector<double> scores;   // row-major; mean of covering window scores
  std::vector<int> coverage;    // windows covering each pixel

  double score(int y, int x) const { return scores[static_cast<std::size_t>(y) * width + x]; }
  int covered(int y, int x) const { return coverage[static_cast<std::size_t>(y) * width + x]; }

  /// Single-channel float image of the scores.
  Image to_image() const;
  /// Dark-to-bright colormap rendering for display.
  Image render() const;
};

/// Slides a `patch` window every `stride` pixels. Pixels never covered (when
/// the stride skips the right or bottom margin) keep score 0, coverage 0.
DetectionHeatmap heatmap(const PatchScorer& scorer, const Image& image, int patch, int stride,
                         int batch_size = 256);

}  // namespace semaforge::forensics
