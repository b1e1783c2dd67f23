#pragma once

// Independent reference implementations used as test oracles. They favor
// the most literal formulation over speed and share no code with the
// library beyond the raster containers.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semaforge/raster.hpp"

namespace oracle {

/// Worst element-wise relative error between autograd and central finite
/// differences of a scalar function of one double tensor.
inline double gradient_error(const std::function<torch::Tensor(const torch::Tensor&)>& f, torch::Tensor x,
                             double h = 1e-6) {
  x = x.to(torch::kDouble).detach().clone().requires_grad_(true);
  auto y = f(x);
  y.backward();
  const auto analytic = x.grad().detach().clone();
  double worst = 0.0;
  auto flat = x.detach().view({-1});
  auto a = analytic.view({-1});
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double v = flat[i].item<double>();
    auto xp = x.detach().clone();
    xp.view({-1})[i] = v + h;
    auto xm = x.detach().clone();
    xm.view({-1})[i] = v - h;
    const double numeric = (f(xp).item<double>() - f(xm).item<double>()) / (2.0 * h);
    const double an = a[i].item<double>();
    const double scale = std::max(std::abs(an), std::abs(numeric));
    if (scale < 1e-10) continue;
    worst = std::max(worst, std::abs(an - numeric) / scale);
  }
  return worst;
}

/// Heatmap by explicit window enumeration: every window is scored alone and
/// each pixel averages the windows containing it (row-major accumulation).
struct BruteHeatmap {
  std::vector<double> scores;
  std::vector<int> coverage;
};

inline BruteHeatmap brute_heatmap(const std::function<double(const semaforge::Image&)>& score,
                                  const semaforge::Image& image, int patch, int stride) {
  const int h = image.height(), w = image.width();
  BruteHeatmap out{std::vector<double>(static_cast<std::size_t>(h) * w, 0.0),
                   std::vector<int>(static_cast<std::size_t>(h) * w, 0)};
  for (int y0 = 0; y0 + patch <= h; y0 += stride) {
    for (int x0 = 0; x0 + patch <= w; x0 += stride) {
      const double s = score(image.crop(y0, x0, patch, patch));
      for (int y = y0; y < y0 + patch; ++y) {
        for (int x = x0; x < x0 + patch; ++x) {
          out.scores[static_cast<std::size_t>(y) * w + x] += s;
          out.coverage[static_cast<std::size_t>(y) * w + x] += 1;
        }
      }
    }
  }
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (out.coverage[i] > 0) out.scores[i] /= out.coverage[i];
  }
  return out;
}

/// Unbiased MMD^2 with the cubic polynomial kernel, summed term by term.
inline double kid_explicit(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  const double d = static_cast<double>(a.front().size());
  auto k = [&](const std::vector<double>& x, const std::vector<double>& y) {
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    return std::pow(dot / d + 1.0, 3);
  };
  const double m = static_cast<double>(a.size()), n = static_cast<double>(b.size());
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (i != j) saa += k(a[i], a[j]);
    }
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (i != j) sbb += k(b[i], b[j]);
    }
  }
  for (const auto& x : a) {
    for (const auto& y : b) sab += k(x, y);
  }
  return saa / (m * (m - 1)) + sbb / (n * (n - 1)) - 2.0 * sab / (m * n);
}

/// AUC as the fraction of (positive, negative) pairs ranked correctly,
/// ties counted half.
inline double auc_pairs(std::span<const double> scores, std::span<const int> labels) {
  double good = 0.0, total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      total += 1.0;
      if (scores[i] > scores[j]) good += 1.0;
      else if (scores[i] == scores[j]) good += 0.5;
    }
  }
  return good / total;
}

/// Gaussian blur by direct 2-D summation with a separable kernel
/// exp(-t^2 / 2r^2), support ceil(3r), replicated borders.
inline semaforge::Image blur_direct(const semaforge::Image& img, double radius) {
  const int half = static_cast<int>(std::ceil(3.0 * radius));
  std::vector<double> k(2 * half + 1);
  double total = 0.0;
  for (int t = -half; t <= half; ++t) total += k[t + half] = std::exp(-(t * t) / (2.0 * radius * radius));
  for (auto& v : k) v /= total;
  semaforge::Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        double s = 0.0;
        for (int dy = -half; dy <= half; ++dy) {
          for (int dx = -half; dx <= half; ++dx) {
            const int yy = std::clamp(y + dy, 0, img.height() - 1);
            const int xx = std::clamp(x + dx, 0, img.width() - 1);
            s += k[dy + half] * k[dx + half] * img.at(yy, xx, c);
          }
        }
        out.at(y, x, c) = static_cast<float>(s);
      }
    }
  }
  return out;
}

/// Number of integer offsets within a disc of the given radius.
inline int disc_area(int r) {
  int n = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) n += dy * dy + dx * dx <= r * r;
  }
  return n;
}

/// Euclidean distance from (y, x) to the nearest set pixel, brute force.
inline double distance_to_mask(const semaforge::BinaryMask& m, int y, int x) {
  double best = 1e300;
  for (int yy = 0; yy < m.height(); ++yy) {
    for (int xx = 0; xx < m.width(); ++xx) {
      if (m.at(yy, xx)) best = std::min(best, std::hypot(yy - y, xx - x));
    }
  }
  return best;
}

inline semaforge::Image random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  semaforge::Image img(h, w, c);
  for (auto& v : img.pixels()) v = u(rng);
  return img;
}

/// Image whose values are exact 8-bit levels, so PNG round trips are lossless.
inline semaforge::Image random_quantized_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  semaforge::Image img(h, w, c);
  for (auto& v : img.pixels()) v = static_cast<float>(rng() % 256) / 255.0f;
  return img;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("semaforge_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
