#include "semaforge/forensics/heatmap.hpp"

#include <algorithm>
#include <array>

#include "semaforge/data.hpp"
#include "semaforge/error.hpp"

namespace semaforge::forensics {

Image DetectionHeatmap::to_image() const {
  Image out(height, width, 1);
  for (std::size_t i = 0; i < scores.size(); ++i) out.pixels()[i] = static_cast<float>(scores[i]);
  return out;
}

Image DetectionHeatmap::render() const {
  // black -> purple -> orange -> pale yellow
  static constexpr std::array<std::array<float, 3>, 4> stops{{{0.0f, 0.0f, 0.02f},
                                                              {0.45f, 0.07f, 0.45f},
                                                              {0.95f, 0.45f, 0.1f},
                                                              {0.99f, 0.99f, 0.75f}}};
  Image out(height, width, 3);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(score(y, x), 0.0, 1.0) * (stops.size() - 1);
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
      const float f = static_cast<float>(t - k);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = stops[k][c] + f * (stops[k + 1][c] - stops[k][c]);
    }
  }
  return out;
}

DetectionHeatmap heatmap(const PatchScorer& scorer, const Image& image, int patch, int stride, int batch_size) {
  if (patch < 1) throw InvalidArgument("patch must be positive");
  if (image.height() < patch || image.width() < patch) throw ShapeError("image smaller than the detector patch");
  if (stride < 1 || stride > std::min(image.height(), image.width())) {
    throw InvalidArgument("stride must lie in [1, min(height, width)]");
  }
  DetectionHeatmap h;
  h.height = image.height();
  h.width = image.width();
  h.scores.assign(static_cast<std::size_t>(h.height) * h.width, 0.0);
  h.coverage.assign(h.scores.size(), 0);

  const auto origins = window_origins(image.height(), image.width(), patch, stride);
  std::vector<Image> batch;
  for (std::size_t start = 0; start < origins.size(); start += batch_size) {
    const auto end = std::min(origins.size(), start + batch_size);
    batch.clear();
    for (auto i = start; i < end; ++i) batch.push_back(image.crop(origins[i].y, origins[i].x, patch, patch));
    const auto s = scorer(batch);
    if (s.size() != batch.size()) throw ShapeError("scorer returned the wrong number of scores");
    // Windows are accumulated in row-major order, so every pixel sums its
    // scores in enumeration order.
    for (auto i = start; i < end; ++i) {
      const auto [oy, ox] = origins[i];
      for (int y = oy; y < oy + patch; ++y) {
        double* row = h.scores.data() + static_cast<std::size_t>(y) * h.width;
        int* cov = h.coverage.data() + static_cast<std::size_t>(y) * h.width;
        for (int x = ox; x < ox + patch; ++x) {
          row[x] += s[i - start];
          ++cov[x];
        }
      }
    }
  }
  for (std::size_t i = 0; i < h.scores.size(); ++i) {
    if (h.coverage[i] > 0) h.scores[i] /= h.coverage[i];
  }
  return h;
}

}  // namespace semaforge::forensics
