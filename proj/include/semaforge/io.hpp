#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semaforge/raster.hpp"

namespace semaforge::io {

using Bytes = std::vector<std::uint8_t>;

/// Decodes an 8-bit PNG. Gray/RGB/alpha inputs are converted to RGB unless
/// `channels` is 1 (gray).
Image decode_png(std::span<const std::uint8_t> bytes, int channels = 3);
Bytes encode_png(const Image& image);

Image read_png(const std::filesystem::path& path, int channels = 3);
void write_png(const std::filesystem::path& path, const Image& image);

SemanticMap read_map_png(const std::filesystem::path& path, const Palette& palette);
void write_map_png(const std::filesystem::path& path, const SemanticMap& map);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(std::string_view text);

/// NumPy .npy (little-endian float32, C order) with shape {height, width}
/// or {height, width, channels}.
Bytes encode_npy(const Image& image);
Image decode_npy(std::span<const std::uint8_t> bytes);

}  // namespace semaforge::io
