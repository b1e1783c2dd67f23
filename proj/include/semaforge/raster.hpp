#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace semaforge {

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  auto operator<=>(const Rgb8&) const = default;
};

/// Float raster in row-major HWC order. Pixel values live in the unit range
/// [0, 1] for images; masks and heatmaps reuse the same container.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<float> pixels() { return data_; }
  std::span<const float> pixels() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  /// Copy of the region [y, y+h) x [x, x+w). Throws ShapeError when the
  /// region leaves the raster.
  Image crop(int y, int x, int h, int w) const;

  /// Writes `patch` with its top-left corner at (y, x).
  void paste(const Image& patch, int y, int x);

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

using ImageTile = Image;

/// Round-to-nearest 8-bit quantization of a unit-range raster.
std::vector<std::uint8_t> to_bytes(const Image& image);
Image from_bytes(std::span<const std::uint8_t> bytes, int height, int width, int channels);
std::uint8_t quantize(float v);

struct PaletteEntry {
  std::string name;
  Rgb8 color;
  bool operator==(const PaletteEntry&) const = default;
};

class Palette {
 public:
  Palette() = default;
  explicit Palette(std::vector<PaletteEntry> entries);

  /// Road/building/water/vegetation/land palette used by the synthetic
  /// generators and as the fallback for datasets without a manifest.
  static Palette default_map_palette();

  std::size_t size() const { return entries_.size(); }
  const std::vector<PaletteEntry>& entries() const { return entries_; }
  const PaletteEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Index of the class whose color equals `c` exactly, or -1.
  int find(Rgb8 c) const;
  /// Index of the class with the nearest color (squared RGB distance).
  int nearest(Rgb8 c) const;
  int index_of(const std::string& name) const;

  bool operator==(const Palette&) const = default;

 private:
  std::vector<PaletteEntry> entries_;
};

/// Class-indexed raster. Every pixel holds an index into `palette()`.
class SemanticMap {
 public:
  SemanticMap() = default;
  SemanticMap(int height, int width, Palette palette, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  const Palette& palette() const { return palette_; }

  std::uint8_t& at(int y, int x) { return classes_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return classes_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const std::uint8_t> classes() const { return classes_; }
  std::span<std::uint8_t> classes() { return classes_; }

  SemanticMap crop(int y, int x, int h, int w) const;

  /// Palette colors as a 3-channel unit-range image.
  Image to_rgb() const;

  /// Decodes palette-exact colors; any other color raises DecodeError.
  static SemanticMap from_rgb_exact(const Image& rgb, const Palette& palette);
  /// Snaps every color to the nearest palette entry (for rendered tiles
  /// that are not palette-exact, e.g. anti-aliased roadmaps).
  static SemanticMap from_rgb_nearest(const Image& rgb, const Palette& palette);

  bool operator==(const SemanticMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  Palette palette_;
  std::vector<std::uint8_t> classes_;
};

/// Binary raster (0/1 bytes).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint8_t& at(int y, int x) { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int y, int x) const { return bits_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  Image to_image() const;
  static BinaryMask from_image(const Image& image, float threshold = 0.5f);

  bool operator==(const BinaryMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace semaforge
