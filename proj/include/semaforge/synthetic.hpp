#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semaforge/data.hpp"
#include "semaforge/raster.hpp"

// Deterministic synthetic scenes and patches. They stand in for scraped
// imagery in tests and in the toy profile.
namespace semaforge::synth {

struct Rect {
  int y = 0;
  int x = 0;
  int h = 0;
  int w = 0;
};

struct Scene {
  SemanticMap map;
  std::vector<Rect> buildings;
};

/// Urban-looking layout: land background, a road grid, rectangular
/// buildings, and optionally a water body and a park.
Scene random_scene(int height, int width, std::uint64_t seed,
                   const Palette& palette = Palette::default_map_palette());

/// Overhead-imagery rendering of a map: per-class albedo, per-building roof
/// shade, smooth illumination and mild texture.
Image render_satellite(const SemanticMap& map, std::uint64_t seed);

PairedSample make_pair(int size, std::uint64_t seed, const std::string& id = {},
                       const std::string& city = "synthetic");

std::vector<PairedSample> make_pairs(int count, int size, std::uint64_t seed);

/// Copy of `map` with `rect` overwritten by `cls`.
SemanticMap fill_rect(const SemanticMap& map, Rect rect, std::uint8_t cls);

/// Low-order polynomial intensity ramps; the "pristine" class of the toy
/// detector task.
Image smooth_gradient_patch(int size, std::mt19937_64& rng);

/// A smooth ramp overlaid with a checkerboard-modulated noise field; the
/// "generated" class of the toy detector task.
Image checkerboard_noise_patch(int size, std::mt19937_64& rng);

/// Balanced separable patch task with a fixed train/val split.
PatchDataset separable_patch_task(int per_class, int patch, double val_fraction, std::uint64_t seed);

}  // namespace semaforge::synth
