#include "semaforge/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "semaforge/error.hpp"

namespace semaforge::synth {

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(unit_uniform(rng) * (hi - lo + 1));
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

double normal(std::mt19937_64& rng) {
  const double u1 = std::max(unit_uniform(rng), 1e-300);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint8_t class_or(const Palette& p, const char* name, std::uint8_t fallback) {
  const int k = p.index_of(name);
  return k < 0 ? fallback : static_cast<std::uint8_t>(k);
}

void fill(SemanticMap& m, Rect r, std::uint8_t cls) {
  const int y1 = std::min(m.height(), r.y + r.h), x1 = std::min(m.width(), r.x + r.w);
  for (int y = std::max(0, r.y); y < y1; ++y) {
    for (int x = std::max(0, r.x); x < x1; ++x) m.at(y, x) = cls;
  }
}

}  // namespace

Scene random_scene(int height, int width, std::uint64_t seed, const Palette& palette) {
  if (height < 8 || width < 8) throw ShapeError("synthetic scenes need at least 8x8 pixels");
  std::mt19937_64 rng(seed);
  const auto land = class_or(palette, "land", 0);
  const auto road = class_or(palette, "road", 1);
  const auto building = class_or(palette, "building", 2);
  const auto water = class_or(palette, "water", 3);
  const auto vegetation = class_or(palette, "vegetation", 4);

  Scene scene{SemanticMap(height, width, palette, land), {}};
  auto& m = scene.map;
  const int unit = std::max(2, std::min(height, width) / 16);

  if (unit_uniform(rng) < 0.5) {  // water body
    const double cy = uniform(rng, 0, height), cx = uniform(rng, 0, width);
    const double ry = uniform(rng, 2.0, 5.0) * unit, rx = uniform(rng, 2.0, 5.0) * unit;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        if (dy * dy + dx * dx <= 1.0) m.at(y, x) = water;
      }
    }
  }
  if (unit_uniform(rng) < 0.6) {  // park
    fill(m, {uniform_int(rng, 0, height - 4 * unit), uniform_int(rng, 0, width - 4 * unit),
             uniform_int(rng, 2, 4) * unit, uniform_int(rng, 2, 4) * unit},
         vegetation);
  }

  std::vector<int> rows, cols;
  for (int i = 0, n = uniform_int(rng, 1, 2); i < n; ++i) rows.push_back(uniform_int(rng, unit, height - 2 * unit));
  for (int i = 0, n = uniform_int(rng, 1, 2); i < n; ++i) cols.push_back(uniform_int(rng, unit, width - 2 * unit));
  const int road_w = std::max(2, unit);
  for (int r : rows) fill(m, {r, 0, road_w, width}, road);
  for (int c : cols) fill(m, {0, c, height, road_w}, road);

  const int attempts = 6 + uniform_int(rng, 0, 6);
  for (int i = 0; i < attempts; ++i) {
    Rect b{uniform_int(rng, 0, height - 2 * unit), uniform_int(rng, 0, width - 2 * unit),
           uniform_int(rng, 2, 4) * unit / 2 + unit, uniform_int(rng, 2, 4) * unit / 2 + unit};
    b.h = std::min(b.h, height - b.y);
    b.w = std::min(b.w, width - b.x);
    bool free = true;
    for (int y = b.y; y < b.y + b.h && free; ++y) {
      for (int x = b.x; x < b.x + b.w; ++x) {
        if (m.at(y, x) != land) {
          free = false;
          break;
        }
      }
    }
    if (!free) continue;
    fill(m, b, building);
    scene.buildings.push_back(b);
  }
  return scene;
}

Image render_satellite(const SemanticMap& map, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  const auto& palette = map.palette();
  // Overhead albedo per known class; unknown classes fall back to a darkened
  // palette color.
  auto albedo = [&](std::uint8_t k) -> std::array<float, 3> {
    const std::string& name = k < palette.size() ? palette[k].name : std::string();
    if (name == "land") return {0.52f, 0.48f, 0.40f};
    if (name == "road") return {0.38f, 0.38f, 0.40f};
    if (name == "building") return {0.78f, 0.74f, 0.70f};
    if (name == "water") return {0.10f, 0.20f, 0.33f};
    if (name == "vegetation") return {0.18f, 0.36f, 0.14f};
    const Rgb8 c = k < palette.size() ? palette[k].color : Rgb8{};
    return {c.r / 320.0f, c.g / 320.0f, c.b / 320.0f};
  };

  const int h = map.height(), w = map.width();
  const double gy = uniform(rng, -0.08, 0.08), gx = uniform(rng, -0.08, 0.08);
  const double phase_y = uniform(rng, 0, 6.28), phase_x = uniform(rng, 0, 6.28);
  const double tint = uniform(rng, -0.04, 0.04);

  // Deterministic per-pixel texture from a second stream.
  Image out(h, w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto k = map.at(y, x);
      auto a = albedo(k);
      const double shade = gy * (2.0 * y / h - 1.0) + gx * (2.0 * x / w - 1.0) +
                           0.03 * std::sin(phase_y + 6.0 * y / h) * std::cos(phase_x + 5.0 * x / w);
      const double grain = 0.015 * normal(rng);
      for (int c = 0; c < 3; ++c) {
        const double v = a[c] + shade + grain + (c == 0 ? tint : 0.0);
        out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

PairedSample make_pair(int size, std::uint64_t seed, const std::string& id, const std::string& city) {
  auto scene = random_scene(size, size, seed);
  PairedSample s;
  s.image = render_satellite(scene.map, seed);
  s.map = std::move(scene.map);
  s.source_id = id.empty() ? "synth_" + std::to_string(seed) : id;
  s.city = city;
  return s;
}

std::vector<PairedSample> make_pairs(int count, int size, std::uint64_t seed) {
  std::vector<PairedSample> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(make_pair(size, seed * 1000003ull + static_cast<std::uint64_t>(i),
                            "synth_" + std::to_string(i)));
  }
  return out;
}

SemanticMap fill_rect(const SemanticMap& map, Rect rect, std::uint8_t cls) {
  SemanticMap out = map;
  fill(out, rect, cls);
  return out;
}

Image smooth_gradient_patch(int size, std::mt19937_64& rng) {
  Image out(size, size, 3);
  const double a = uniform(rng, 0.2, 0.8);
  const double by = uniform(rng, -0.3, 0.3), bx = uniform(rng, -0.3, 0.3);
  const double q = uniform(rng, -0.2, 0.2);
  std::array<double, 3> tint{uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = 2.0 * y / (size - 1) - 1.0, v = 2.0 * x / (size - 1) - 1.0;
      const double base = a + 0.5 * (by * u + bx * v) + 0.25 * q * u * v;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = static_cast<float>(std::clamp(base + tint[c], 0.0, 1.0));
    }
  }
  return out;
}

Image checkerboard_noise_patch(int size, std::mt19937_64& rng) {
  Image out = smooth_gradient_patch(size, rng);
  const int cell = uniform_int(rng, 1, 2);
  const double amp = uniform(rng, 0.06, 0.12);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double sign = ((y / cell + x / cell) % 2 == 0) ? 1.0 : -1.0;
      const double n = amp * (0.6 * sign + 0.4 * normal(rng));
      for (int c = 0; c < 3; ++c) {
        out.at(y, x, c) = static_cast<float>(std::clamp(out.at(y, x, c) + n, 0.0, 1.0));
      }
    }
  }
  return out;
}

PatchDataset separable_patch_task(int per_class, int patch, double val_fraction, std::uint64_t seed) {
  if (per_class < 1) throw EmptyDatasetError("per_class must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Image> patches;
  std::vector<PatchLabel> labels;
  std::vector<Split> splits;
  const int n_val = std::clamp(static_cast<int>(std::lround(val_fraction * per_class)), 0, per_class);
  for (int i = 0; i < per_class; ++i) {
    const Split split = i < per_class - n_val ? Split::train : Split::val;
    patches.push_back(smooth_gradient_patch(patch, rng));
    labels.push_back(PatchLabel::pristine);
    splits.push_back(split);
    patches.push_back(checkerboard_noise_patch(patch, rng));
    labels.push_back(PatchLabel::generated);
    splits.push_back(split);
  }
  return PatchDataset::from_patches(std::move(patches), std::move(labels), std::move(splits));
}

}  // namespace semaforge::synth
