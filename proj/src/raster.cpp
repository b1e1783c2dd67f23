#include "semaforge/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semaforge/error.hpp"

namespace semaforge {

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    throw ShapeError("negative raster dimension");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image Image::crop(int y, int x, int h, int w) const {
  if (y < 0 || x < 0 || h < 0 || w < 0 || y + h > height_ || x + w > width_) {
    throw ShapeError("crop region outside raster");
  }
  Image out(h, w, channels_);
  const std::size_t row = static_cast<std::size_t>(w) * channels_;
  for (int r = 0; r < h; ++r) {
    std::copy_n(data_.begin() + index(y + r, x, 0), row, out.data_.begin() + out.index(r, 0, 0));
  }
  return out;
}

void Image::paste(const Image& patch, int y, int x) {
  if (patch.channels_ != channels_ || y < 0 || x < 0 || y + patch.height_ > height_ ||
      x + patch.width_ > width_) {
    throw ShapeError("paste region outside raster");
  }
  const std::size_t row = static_cast<std::size_t>(patch.width_) * channels_;
  for (int r = 0; r < patch.height_; ++r) {
    std::copy_n(patch.data_.begin() + patch.index(r, 0, 0), row, data_.begin() + index(y + r, x, 0));
  }
}

std::uint8_t quantize(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

std::vector<std::uint8_t> to_bytes(const Image& image) {
  std::vector<std::uint8_t> out(image.size());
  std::transform(image.pixels().begin(), image.pixels().end(), out.begin(), quantize);
  return out;
}

Image from_bytes(std::span<const std::uint8_t> bytes, int height, int width, int channels) {
  Image out(height, width, channels);
  if (bytes.size() != out.size()) {
    throw ShapeError("byte buffer does not match raster shape");
  }
  std::transform(bytes.begin(), bytes.end(), out.pixels().begin(),
                 [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
  return out;
}

Palette::Palette(std::vector<PaletteEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() > 256) {
    throw InvalidArgument("palette holds at most 256 classes");
  }
}

Palette Palette::default_map_palette() {
  return Palette({
      {"land", {242, 239, 233}},
      {"road", {255, 255, 255}},
      {"building", {217, 208, 201}},
      {"water", {170, 218, 255}},
      {"vegetation", {197, 232, 197}},
  });
}

int Palette::find(Rgb8 c) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].color == c) return static_cast<int>(i);
  }
  return -1;
}

int Palette::nearest(Rgb8 c) const {
  int best = -1;
  int best_d = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i].color;
    const int dr = int(e.r) - c.r, dg = int(e.g) - c.g, db = int(e.b) - c.b;
    const int d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int Palette::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

SemanticMap::SemanticMap(int height, int width, Palette palette, std::uint8_t fill)
    : height_(height), width_(width), palette_(std::move(palette)) {
  if (height < 0 || width < 0) throw ShapeError("negative map dimension");
  classes_.assign(static_cast<std::size_t>(height) * width, fill);
}

SemanticMap SemanticMap::crop(int y, int x, int h, int w) const {
  if (y < 0 || x < 0 || h < 0 || w < 0 || y + h > height_ || x + w > width_) {
    throw ShapeError("crop region outside map");
  }
  SemanticMap out(h, w, palette_);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out.at(r, c) = at(y + r, x + c);
  }
  return out;
}

Image SemanticMap::to_rgb() const {
  Image out(height_, width_, 3);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::uint8_t k = at(y, x);
      const Rgb8 c = k < palette_.size() ? palette_[k].color : Rgb8{0, 0, 0};
      out.at(y, x, 0) = c.r / 255.0f;
      out.at(y, x, 1) = c.g / 255.0f;
      out.at(y, x, 2) = c.b / 255.0f;
    }
  }
  return out;
}

namespace {

Rgb8 pixel_rgb(const Image& rgb, int y, int x) {
  if (rgb.channels() == 1) {
    const auto v = quantize(rgb.at(y, x, 0));
    return {v, v, v};
  }
  return {quantize(rgb.at(y, x, 0)), quantize(rgb.at(y, x, 1)), quantize(rgb.at(y, x, 2))};
}

}  // namespace

SemanticMap SemanticMap::from_rgb_exact(const Image& rgb, const Palette& palette) {
  if (rgb.channels() != 3 && rgb.channels() != 1) throw ShapeError("map raster must be RGB");
  SemanticMap out(rgb.height(), rgb.width(), palette);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const Rgb8 c = pixel_rgb(rgb, y, x);
      const int k = palette.find(c);
      if (k < 0) {
        throw DecodeError("map pixel (" + std::to_string(y) + ", " + std::to_string(x) +
                          ") has color " + std::to_string(c.r) + "," + std::to_string(c.g) + "," +
                          std::to_string(c.b) + " outside the palette");
      }
      out.at(y, x) = static_cast<std::uint8_t>(k);
    }
  }
  return out;
}

SemanticMap SemanticMap::from_rgb_nearest(const Image& rgb, const Palette& palette) {
  if (rgb.channels() != 3 && rgb.channels() != 1) throw ShapeError("map raster must be RGB");
  if (palette.size() == 0) throw InvalidArgument("empty palette");
  SemanticMap out(rgb.height(), rgb.width(), palette);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      out.at(y, x) = static_cast<std::uint8_t>(palette.nearest(pixel_rgb(rgb, y, x)));
    }
  }
  return out;
}

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) throw ShapeError("negative mask dimension");
  bits_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Image BinaryMask::to_image() const {
  Image out(height_, width_, 1);
  std::transform(bits_.begin(), bits_.end(), out.pixels().begin(),
                 [](std::uint8_t b) { return b ? 1.0f : 0.0f; });
  return out;
}

BinaryMask BinaryMask::from_image(const Image& image, float threshold) {
  BinaryMask out(image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out.at(y, x) = image.at(y, x, 0) >= threshold ? 1 : 0;
    }
  }
  return out;
}

}  // namespace semaforge
