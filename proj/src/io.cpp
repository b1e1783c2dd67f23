#include "semaforge/io.hpp"

#include <png.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "semaforge/error.hpp"

namespace semaforge::io {

namespace {

struct PngImage {
  png_image img{};
  PngImage() {
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

Image decode_png(std::span<const std::uint8_t> bytes, int channels) {
  if (channels != 1 && channels != 3) throw InvalidArgument("decode_png: channels must be 1 or 3");
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.img, bytes.data(), bytes.size())) {
    throw DecodeError(std::string("invalid PNG: ") + png.img.message);
  }
  png.img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int h = static_cast<int>(png.img.height);
  const int w = static_cast<int>(png.img.width);
  Bytes buffer(PNG_IMAGE_SIZE(png.img));
  if (!png_image_finish_read(&png.img, nullptr, buffer.data(), 0, nullptr)) {
    throw DecodeError(std::string("invalid PNG: ") + png.img.message);
  }
  return from_bytes(buffer, h, w, channels);
}

Bytes encode_png(const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw InvalidArgument("encode_png: image must have 1 or 3 channels");
  }
  const Bytes pixels = to_bytes(image);
  PngImage png;
  png.img.width = static_cast<png_uint_32>(image.width());
  png.img.height = static_cast<png_uint_32>(image.height());
  png.img.format = image.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.img, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + png.img.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&png.img, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + png.img.message);
  }
  out.resize(size);
  return out;
}

Image read_png(const std::filesystem::path& path, int channels) {
  return decode_png(read_file(path), channels);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  write_file(path, encode_png(image));
}

SemanticMap read_map_png(const std::filesystem::path& path, const Palette& palette) {
  return SemanticMap::from_rgb_exact(read_png(path, 3), palette);
}

void write_map_png(const std::filesystem::path& path, const SemanticMap& map) {
  write_png(path, map.to_rgb());
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

Bytes base64_decode(std::string_view text) {
  // Accept an optional data-URL prefix.
  if (const auto comma = text.find(','); text.starts_with("data:") && comma != std::string_view::npos) {
    text.remove_prefix(comma + 1);
  }
  Bytes out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  std::size_t padding = 0;
  for (char c : text) {
    if (c == '=') {
      ++padding;
      continue;
    }
    if (c == '\n' || c == '\r' || c == ' ') continue;
    const int v = decode_char(c);
    if (v < 0 || padding > 0) throw DecodeError("invalid base64 payload");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  if (padding > 2 || bits == 6) throw DecodeError("invalid base64 length or padding");
  return out;
}

Bytes encode_npy(const Image& image) {
  static_assert(std::endian::native == std::endian::little, "npy writer assumes little-endian");
  std::ostringstream header;
  header << "{'descr': '<f4', 'fortran_order': False, 'shape': (" << image.height() << ", "
         << image.width();
  if (image.channels() != 1) header << ", " << image.channels();
  header << "), }";
  std::string h = header.str();
  // magic(6) + version(2) + len(2) + header, padded with spaces to 64 bytes, newline-terminated
  const std::size_t unpadded = 10 + h.size() + 1;
  h.append((64 - unpadded % 64) % 64, ' ');
  h += '\n';
  Bytes out = {0x93, 'N', 'U', 'M', 'P', 'Y', 1, 0};
  out.push_back(static_cast<std::uint8_t>(h.size() & 0xFF));
  out.push_back(static_cast<std::uint8_t>(h.size() >> 8));
  out.insert(out.end(), h.begin(), h.end());
  const auto* raw = reinterpret_cast<const std::uint8_t*>(image.pixels().data());
  out.insert(out.end(), raw, raw + image.size() * sizeof(float));
  return out;
}

Image decode_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 || bytes[0] != 0x93 || std::memcmp(bytes.data() + 1, "NUMPY", 5) != 0) {
    throw DecodeError("not an npy file");
  }
  const std::size_t hlen = bytes[8] | (bytes[9] << 8);
  if (bytes.size() < 10 + hlen) throw DecodeError("truncated npy header");
  const std::string header(bytes.begin() + 10, bytes.begin() + 10 + static_cast<long>(hlen));
  if (header.find("'<f4'") == std::string::npos || header.find("False") == std::string::npos) {
    throw DecodeError("npy: only C-order float32 supported");
  }
  const auto open = header.find('(');
  const auto close = header.find(')');
  std::vector<int> dims;
  std::stringstream ss(header.substr(open + 1, close - open - 1));
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok.find_first_of("0123456789") != std::string::npos) dims.push_back(std::stoi(tok));
  }
  if (dims.size() != 2 && dims.size() != 3) throw DecodeError("npy: expected 2 or 3 dimensions");
  Image out(dims[0], dims[1], dims.size() == 3 ? dims[2] : 1);
  const std::size_t payload = out.size() * sizeof(float);
  if (bytes.size() != 10 + hlen + payload) throw DecodeError("npy payload size mismatch");
  std::memcpy(out.pixels().data(), bytes.data() + 10 + hlen, payload);
  return out;
}

}  // namespace semaforge::io
