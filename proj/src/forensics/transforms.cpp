#include "semaforge/forensics/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "semaforge/data.hpp"
#include "semaforge/error.hpp"
#include "semaforge/log.hpp"

namespace semaforge::forensics {

namespace {

struct KindName {
  TransformKind kind;
  const char* name;
};

constexpr KindName kNames[] = {{TransformKind::gamma, "gamma"},
                               {TransformKind::gaussian_noise, "gaussian-noise"},
                               {TransformKind::gaussian_blur, "gaussian-blur"},
                               {TransformKind::upscale, "upscale"},
                               {TransformKind::upscale_downscale, "upscale-downscale"},
                               {TransformKind::rotate_cw, "rotate-cw"},
                               {TransformKind::rotate_ccw, "rotate-ccw"}};

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

float sample_bilinear(const Image& img, double fy, double fx, int c, bool reflect_fill) {
  const int h = img.height(), w = img.width();
  const int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
  const double ty = fy - y0, tx = fx - x0;
  auto px = [&](int y, int x) {
    if (reflect_fill) {
      y = reflect(y, h);
      x = reflect(x, w);
    } else {
      y = std::clamp(y, 0, h - 1);
      x = std::clamp(x, 0, w - 1);
    }
    return static_cast<double>(img.at(y, x, c));
  };
  const double v = (1 - ty) * ((1 - tx) * px(y0, x0) + tx * px(y0, x0 + 1)) +
                   ty * ((1 - tx) * px(y0 + 1, x0) + tx * px(y0 + 1, x0 + 1));
  return static_cast<float>(v);
}

}  // namespace

const char* to_string(TransformKind kind) {
  for (const auto& n : kNames) {
    if (n.kind == kind) return n.name;
  }
  return "unknown";
}

TransformKind transform_kind_from_string(const std::string& s) {
  for (const auto& n : kNames) {
    if (s == n.name) return n.kind;
  }
  throw InvalidArgument("unknown transform '" + s + "'");
}

std::vector<TransformKind> all_transform_kinds() {
  std::vector<TransformKind> out;
  for (const auto& n : kNames) out.push_back(n.kind);
  return out;
}

double identity_parameter(TransformKind kind) {
  switch (kind) {
    case TransformKind::gamma:
    case TransformKind::upscale:
    case TransformKind::upscale_downscale: return 1.0;
    default: return 0.0;
  }
}

void TransformSpec::validate() const {
  if (!(min <= max)) throw ValidationError(std::string(to_string(kind)) + ": min exceeds max");
  if (kind == TransformKind::gaussian_blur && (min < 0.1 || max > 5.0)) {
    throw ValidationError("blur radius must lie in [0.1, 5.0]");
  }
  if (kind == TransformKind::gamma && min <= 0.0) throw ValidationError("gamma must be positive");
  if ((kind == TransformKind::upscale || kind == TransformKind::upscale_downscale) && min < 1.0) {
    throw ValidationError("scale factors must be at least 1");
  }
  if (kind == TransformKind::gaussian_noise && min < 0.0) throw ValidationError("noise sigma must be non-negative");
}

std::vector<TransformSpec> default_bart_specs() {
  return {{TransformKind::gamma, 0.5, 2.0},       {TransformKind::gaussian_noise, 0.0, 0.1},
          {TransformKind::gaussian_blur, 0.1, 5.0}, {TransformKind::upscale, 1.1, 2.0},
          {TransformKind::upscale_downscale, 1.1, 2.0}, {TransformKind::rotate_cw, 1.0, 30.0},
          {TransformKind::rotate_ccw, 1.0, 30.0}};
}

Image apply_gamma(const Image& image, double gamma) {
  if (gamma == 1.0) return image;
  Image out = image;
  for (auto& v : out.pixels()) v = static_cast<float>(std::pow(static_cast<double>(v), gamma));
  return out;
}

Image add_gaussian_noise(const Image& image, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return image;
  Image out = image;
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& v : out.pixels()) v = static_cast<float>(std::clamp(v + normal(rng), 0.0, 1.0));
  return out;
}

std::vector<double> gaussian_kernel(double radius) {
  const int half = static_cast<int>(std::ceil(3.0 * radius));
  std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[i + half] = std::exp(-(i * i) / (2.0 * radius * radius));
    sum += k[i + half];
  }
  for (auto& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& image, double radius) {
  if (radius < 0.0) throw InvalidArgument("blur radius must be non-negative");
  if (radius == 0.0) return image;
  const auto k = gaussian_kernel(radius);
  const int half = static_cast<int>(k.size() / 2);
  const int h = image.height(), w = image.width(), ch = image.channels();
  std::vector<double> tmp(static_cast<std::size_t>(h) * w * ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int i = -half; i <= half; ++i) s += k[i + half] * image.at(y, std::clamp(x + i, 0, w - 1), c);
        tmp[(static_cast<std::size_t>(y) * w + x) * ch + c] = s;
      }
    }
  }
  Image out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double s = 0.0;
        for (int i = -half; i <= half; ++i) {
          s += k[i + half] * tmp[(static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x) * ch + c];
        }
        out.at(y, x, c) = static_cast<float>(s);
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  if (height < 1 || width < 1) throw InvalidArgument("resize target must be positive");
  Image out(height, width, image.channels());
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double fy = (y + 0.5) * sy - 0.5, fx = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = sample_bilinear(image, fy, fx, c, false);
    }
  }
  return out;
}

Image upscale(const Image& image, double factor) {
  if (factor < 1.0) throw InvalidArgument("upscale factor must be at least 1");
  if (factor == 1.0) return image;
  const int h = image.height(), w = image.width();
  Image out(h, w, image.channels());
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fy = cy + (y - cy) / factor, fx = cx + (x - cx) / factor;
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = sample_bilinear(image, fy, fx, c, false);
    }
  }
  return out;
}

Image upscale_downscale(const Image& image, double factor) {
  if (factor < 1.0) throw InvalidArgument("upscale factor must be at least 1");
  if (factor == 1.0) return image;
  const int h = image.height(), w = image.width();
  const auto up = resize_bilinear(image, static_cast<int>(std::lround(h * factor)),
                                  static_cast<int>(std::lround(w * factor)));
  return resize_bilinear(up, h, w);
}

Image rotate(const Image& image, double degrees) {
  if (degrees == 0.0) return image;
  const double t = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(t), sn = std::sin(t);
  const int h = image.height(), w = image.width();
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  Image out(h, w, image.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // inverse map; y grows downwards, so counter-clockwise on screen
      const double dy = y - cy, dx = x - cx;
      const double fx = cx + cs * dx - sn * dy;
      const double fy = cy + sn * dx + cs * dy;
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = sample_bilinear(image, fy, fx, c, true);
    }
  }
  return out;
}

Image apply_transform(const Image& image, TransformKind kind, double p, std::mt19937_64& rng) {
  switch (kind) {
    case TransformKind::gamma: return apply_gamma(image, p);
    case TransformKind::gaussian_noise: return add_gaussian_noise(image, p, rng);
    case TransformKind::gaussian_blur: return gaussian_blur(image, p);
    case TransformKind::upscale: return upscale(image, p);
    case TransformKind::upscale_downscale: return upscale_downscale(image, p);
    case TransformKind::rotate_cw: return rotate(image, -p);
    case TransformKind::rotate_ccw: return rotate(image, p);
  }
  return image;
}

BartDraw draw_bart(const std::vector<TransformSpec>& specs, std::mt19937_64& rng) {
  BartDraw d;
  if (unit_uniform(rng) >= 0.5) return d;
  if (specs.empty()) {
    log(LogLevel::debug, "BaRT drew a transform but no transforms are configured");
    return d;
  }
  const auto& s = specs[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(specs.size()))];
  d.kind = s.kind;
  d.parameter = s.min + (s.max - s.min) * unit_uniform(rng);
  return d;
}

Image bart_augment(const Image& patch, const std::vector<TransformSpec>& specs, std::mt19937_64& rng,
                   BartDraw* draw) {
  const auto d = draw_bart(specs, rng);
  if (draw) *draw = d;
  if (!d.kind) return patch;
  return apply_transform(patch, *d.kind, d.parameter, rng);
}

Image bart_augment(const Image& patch, const std::vector<TransformSpec>& specs, std::uint64_t seed,
                   BartDraw* draw) {
  std::mt19937_64 rng(seed);
  return bart_augment(patch, specs, rng, draw);
}

}  // namespace semaforge::forensics
