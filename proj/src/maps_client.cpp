#include "semaforge/maps_client.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "semaforge/error.hpp"
#include "semaforge/io.hpp"
#include "semaforge/synthetic.hpp"

namespace semaforge {

SyntheticMapsClient::SyntheticMapsClient(int tile_size, Palette palette, std::uint64_t salt)
    : tile_size_(tile_size), palette_(std::move(palette)), salt_(salt) {
  if (tile_size < 8) throw InvalidArgument("synthetic tiles need at least 8 pixels");
}

std::vector<std::uint8_t> SyntheticMapsClient::get_tile(double lat, double lon, int zoom, TileStyle style) {
  // Quantize to ~0.1 m so float noise in the caller does not change the scene.
  const auto qlat = static_cast<std::int64_t>(std::llround(lat * 1e6));
  const auto qlon = static_cast<std::int64_t>(std::llround(lon * 1e6));
  std::uint64_t seed = salt_ ^ 0xCBF29CE484222325ull;
  for (std::uint64_t v : {static_cast<std::uint64_t>(qlat), static_cast<std::uint64_t>(qlon),
                          static_cast<std::uint64_t>(zoom)}) {
    seed = (seed ^ v) * 0x100000001B3ull;
  }
  const auto scene = synth::random_scene(tile_size_, tile_size_, seed, palette_);
  if (style == TileStyle::roadmap) return io::encode_png(scene.map.to_rgb());
  return io::encode_png(synth::render_satellite(scene.map, seed));
}

HttpMapsClient::HttpMapsClient(int tile_size, std::string host, std::string key_env)
    : tile_size_(tile_size), host_(std::move(host)) {
  if (const char* key = std::getenv(key_env.c_str())) api_key_ = key;
}

std::string HttpMapsClient::request_path(double lat, double lon, int zoom, TileStyle style) const {
  std::ostringstream q;
  q.precision(7);
  q << std::fixed << "/maps/api/staticmap?center=" << lat << "," << lon << "&zoom=" << zoom
    << "&size=" << tile_size_ << "x" << tile_size_
    << "&maptype=" << (style == TileStyle::roadmap ? "roadmap" : "satellite");
  if (style == TileStyle::roadmap) q << "&style=element:labels%7Cvisibility:off";
  q << "&format=png";
  if (!api_key_.empty()) q << "&key=" << api_key_;
  return q.str();
}

std::vector<std::uint8_t> HttpMapsClient::get_tile(double lat, double lon, int zoom, TileStyle style) {
  if (api_key_.empty()) throw IoError("maps API key not set");
  httplib::Client client(host_);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  auto res = client.Get(request_path(lat, lon, zoom, style));
  if (!res) throw IoError("maps request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw IoError("maps request returned HTTP " + std::to_string(res->status));
  return {res->body.begin(), res->body.end()};
}

}  // namespace semaforge
