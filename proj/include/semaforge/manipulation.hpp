#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "semaforge/data.hpp"
#include "semaforge/gan/model.hpp"
#include "semaforge/raster.hpp"

namespace semaforge::manip {

struct ManipulationMask {
  BinaryMask mask;
  int feather_radius = 3;
  int dilation = 4;
};

/// Offsets (dy, dx) with dy^2 + dx^2 <= r^2.
std::vector<std::pair<int, int>> disc_offsets(int radius);

BinaryMask dilate(const BinaryMask& mask, int radius);
/// Pixels whose whole radius-disc lies in the mask; coordinates outside the
/// raster take the value of the nearest edge pixel.
BinaryMask erode(const BinaryMask& mask, int radius);

/// 1 where the two maps disagree (compared by palette color), dilated by a
/// disc of radius `dilation`.
ManipulationMask derive_mask(const SemanticMap& original, const SemanticMap& tampered, int dilation = 4,
                             int feather_radius = 3);

/// Feathered alpha. The mask is convolved with a Gaussian (sigma = r/3)
/// truncated to a disc of radius r = feather_radius, so alpha is exactly 0
/// farther than r from the mask and exactly 1 on the mask eroded by r.
/// Radius 0 returns the mask itself.
std::vector<float> feather_alpha(const BinaryMask& mask, int feather_radius);

enum class BlendMethod { alpha, poisson };
const char* to_string(BlendMethod m);
BlendMethod blend_method_from_string(const std::string& s);

/// alpha * generated + (1 - alpha) * pristine; alpha == 0 copies pristine
/// and alpha == 1 copies generated without arithmetic.
ImageTile blend(const ImageTile& pristine, const ImageTile& generated, const ManipulationMask& mask);

/// Seamless cloning: inside the mask the output solves a Poisson equation
/// with the generated image's gradients and pristine boundary values.
/// Pixels outside the mask are pristine.
ImageTile poisson_blend(const ImageTile& pristine, const ImageTile& generated, const BinaryMask& mask);

struct BlendConfig {
  int dilation = 4;
  int feather_radius = 3;
  BlendMethod method = BlendMethod::alpha;

  void validate() const;
  nlohmann::json to_json() const;
  static BlendConfig from_json(const nlohmann::json& j);
};

struct ForgeryRecord {
  SemanticMap original_map;
  SemanticMap tampered_map;
  ImageTile pristine;
  ImageTile generated;
  ManipulationMask mask;
  ImageTile blended;
  BlendConfig config;
  std::string checkpoint_id;
  std::string source_id;
  std::string created_at;  // ISO-8601 UTC, epoch zero in deterministic mode

  nlohmann::json provenance() const;
  /// blended.png, generated.png, mask.png, pristine.png, provenance.json
  void write(const std::filesystem::path& dir) const;
  /// Inverse of write(); the maps are not stored and stay empty.
  static ForgeryRecord read(const std::filesystem::path& dir);
};

std::string utc_timestamp(bool deterministic);

/// generate -> derive_mask -> blend.
ForgeryRecord forge(gan::TranslatorModel& model, const PairedSample& sample, const SemanticMap& tampered,
                    const BlendConfig& config, const std::string& checkpoint_id = {},
                    bool deterministic = false);

}  // namespace semaforge::manip
