#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semaforge/raster.hpp"

namespace semaforge {

enum class TileStyle { roadmap, satellite };

/// Source of rendered map tiles. Implementations return PNG bytes and throw
/// on transport failure; callers decide whether to retry.
class MapsClient {
 public:
  virtual ~MapsClient() = default;
  virtual std::vector<std::uint8_t> get_tile(double lat, double lon, int zoom, TileStyle style) = 0;
  virtual int tile_size() const = 0;
};

/// Deterministic offline client: both styles are rendered from a synthetic
/// scene seeded by the quantized coordinate, so identical requests return
/// identical bytes and roadmap tiles are palette-exact.
class SyntheticMapsClient final : public MapsClient {
 public:
  explicit SyntheticMapsClient(int tile_size = 64, Palette palette = Palette::default_map_palette(),
                               std::uint64_t salt = 0);
  std::vector<std::uint8_t> get_tile(double lat, double lon, int zoom, TileStyle style) override;
  int tile_size() const override { return tile_size_; }

 private:
  int tile_size_;
  Palette palette_;
  std::uint64_t salt_;
};

/// Static-maps HTTP client. The API key is read from the environment
/// variable named by `key_env` at construction.
class HttpMapsClient final : public MapsClient {
 public:
  explicit HttpMapsClient(int tile_size = 512, std::string host = "https://maps.googleapis.com",
                          std::string key_env = "SEMAFORGE_MAPS_API_KEY");
  std::vector<std::uint8_t> get_tile(double lat, double lon, int zoom, TileStyle style) override;
  int tile_size() const override { return tile_size_; }

  /// Request path (with query) for a tile; exposed for tests.
  std::string request_path(double lat, double lon, int zoom, TileStyle style) const;

 private:
  int tile_size_;
  std::string host_;
  std::string api_key_;
};

}  // namespace semaforge
