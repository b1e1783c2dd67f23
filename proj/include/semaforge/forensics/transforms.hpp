#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "semaforge/raster.hpp"

namespace semaforge::forensics {

enum class TransformKind { gamma, gaussian_noise, gaussian_blur, upscale, upscale_downscale, rotate_cw, rotate_ccw };

const char* to_string(TransformKind kind);
TransformKind transform_kind_from_string(const std::string& s);
std::vector<TransformKind> all_transform_kinds();

/// Parameter that leaves a raster unchanged (gamma 1, sigma 0, radius 0,
/// factor 1, angle 0).
double identity_parameter(TransformKind kind);

struct TransformSpec {
  TransformKind kind = TransformKind::gaussian_blur;
  double min = 0.1;
  double max = 5.0;

  void validate() const;
};

/// gamma [0.5, 2], noise sigma (0, 0.1], blur radius [0.1, 5], scale
/// factors [1.1, 2], rotations [1, 30] degrees.
std::vector<TransformSpec> default_bart_specs();

/// Per-channel x^gamma.
Image apply_gamma(const Image& image, double gamma);
/// Additive N(0, sigma^2) noise, clamped to [0, 1].
Image add_gaussian_noise(const Image& image, double sigma, std::mt19937_64& rng);
/// Separable Gaussian with sigma = radius, taps out to ceil(3 * radius),
/// edge pixels replicated. Radius 0 is the identity.
Image gaussian_blur(const Image& image, double radius);
std::vector<double> gaussian_kernel(double radius);
/// Bilinear zoom by `factor` about the center, cropped back to the input size.
Image upscale(const Image& image, double factor);
/// Bilinear resize up by `factor` and back down to the input size.
Image upscale_downscale(const Image& image, double factor);
/// Bilinear rotation about the center with reflected fill; positive angles
/// turn counter-clockwise.
Image rotate(const Image& image, double degrees);
/// Bilinear resize to (height, width), pixel-center aligned.
Image resize_bilinear(const Image& image, int height, int width);

/// Applies one transform; `rng` is only drawn from by the noise transform.
Image apply_transform(const Image& image, TransformKind kind, double parameter, std::mt19937_64& rng);

struct BartDraw {
  std::optional<TransformKind> kind;  // empty: identity
  double parameter = 0.0;
};

/// With probability 1/2 picks one spec uniformly and a parameter uniformly
/// from its range.
BartDraw draw_bart(const std::vector<TransformSpec>& specs, std::mt19937_64& rng);

Image bart_augment(const Image& patch, const std::vector<TransformSpec>& specs, std::mt19937_64& rng,
                   BartDraw* draw = nullptr);
Image bart_augment(const Image& patch, const std::vector<TransformSpec>& specs, std::uint64_t seed,
                   BartDraw* draw = nullptr);

}  // namespace semaforge::forensics
