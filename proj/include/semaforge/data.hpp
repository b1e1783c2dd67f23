#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semaforge/raster.hpp"

namespace semaforge {

class MapsClient;

struct GeoPoint {
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees
  bool operator==(const GeoPoint&) const = default;
};

/// A map/image pair. `city` groups samples for near-duplicate detection.
struct PairedSample {
  SemanticMap map;
  ImageTile image;
  std::string source_id;
  std::string city;
  std::optional<GeoPoint> geo;
};

/// Throws ShapeError unless map and image share height/width and every map
/// pixel indexes the palette.
void validate_sample(const PairedSample& sample);

// ---------------------------------------------------------------------------
// Tiling

struct WindowOrigin {
  int y = 0;
  int x = 0;
  bool operator==(const WindowOrigin&) const = default;
};

/// Row-major origins of all `tile`x`tile` windows placed every `stride`
/// pixels; count is floor((H-tile)/stride+1) * floor((W-tile)/stride+1).
std::vector<WindowOrigin> window_origins(int height, int width, int tile, int stride);

std::vector<ImageTile> tile_image(const ImageTile& raster, int tile, int stride);
std::vector<SemanticMap> tile_map(const SemanticMap& map, int tile, int stride);

// ---------------------------------------------------------------------------
// Patch datasets for detector training

enum class PatchLabel : std::uint8_t { pristine = 0, generated = 1 };
enum class Split : std::uint8_t { train = 0, val = 1 };

const char* to_string(Split split);
Split split_from_string(const std::string& s);

struct PatchRef {
  int source = 0;  // index into the dataset's source rasters
  int y = 0;
  int x = 0;
  PatchLabel label = PatchLabel::pristine;
  Split split = Split::train;
};

struct RasterShape {
  int height = 0;
  int width = 0;
};

/// Patch layout plus split assignment, without pixel data. Pristine source i
/// and generated source i form one split unit, so a scene never straddles
/// train and val. Sources are numbered pristine first, then generated.
struct PatchPlan {
  std::vector<PatchRef> patches;
  int patch_size = 0;
  int stride = 0;

  std::size_t count(Split split) const;
  std::size_t count(Split split, PatchLabel label) const;
};

PatchPlan plan_patch_dataset(std::span<const RasterShape> pristine,
                             std::span<const RasterShape> generated, int patch,
                             double val_fraction, std::uint64_t seed);

class PatchDataset {
 public:
  PatchDataset() = default;
  PatchDataset(std::vector<Image> sources, PatchPlan plan);

  /// One source per patch; used for synthetic patch tasks.
  static PatchDataset from_patches(std::vector<Image> patches, std::vector<PatchLabel> labels,
                                   std::vector<Split> splits);

  std::size_t size() const { return plan_.patches.size(); }
  int patch_size() const { return plan_.patch_size; }
  int stride() const { return plan_.stride; }
  const PatchRef& ref(std::size_t i) const { return plan_.patches[i]; }
  const PatchPlan& plan() const { return plan_; }

  Image patch(std::size_t i) const;
  PatchLabel label(std::size_t i) const { return plan_.patches[i].label; }
  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const { return plan_.count(split); }
  std::size_t count(Split split, PatchLabel label) const { return plan_.count(split, label); }

 private:
  std::vector<Image> sources_;
  PatchPlan plan_;
};

/// Non-overlapping patches labeled by origin, split per source pair.
PatchDataset build_patch_dataset(std::vector<ImageTile> pristine, std::vector<ImageTile> generated,
                                 int patch, double val_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Curation

enum class RejectReason { near_duplicate, non_urban, stitch_artifact };
const char* to_string(RejectReason reason);

struct CurationConfig {
  /// Mean absolute pixel difference (unit scale) below which two images of
  /// the same city count as duplicates.
  double duplicate_threshold = 0.02;
  std::set<std::string> non_urban;        // source ids, supplied by a reviewer
  std::set<std::string> stitch_artifact;  // source ids, supplied by a reviewer
};

struct CurationReport {
  std::size_t kept = 0;
  std::vector<std::pair<std::string, RejectReason>> rejected;
  std::size_t total() const { return kept + rejected.size(); }
};

double mean_absolute_difference(const Image& a, const Image& b);

std::pair<std::vector<PairedSample>, CurationReport> curate(std::vector<PairedSample> samples,
                                                            const CurationConfig& config);

// ---------------------------------------------------------------------------
// Tile ingestion

struct City {
  std::string name;
  GeoPoint center;
};

struct FetchConfig {
  int perturbations = 10;
  double radius_miles = 5.0;
  std::uint64_t seed = 0;
  int zoom = 17;
  int attempts = 3;
  std::chrono::milliseconds backoff{250};  // doubled after every failed attempt
  Palette palette = Palette::default_map_palette();
};

struct FetchFailure {
  std::string source_id;
  GeoPoint coordinate;
  std::string reason;
};

struct FetchResult {
  std::vector<PairedSample> samples;
  std::vector<FetchFailure> failures;
};

/// Uniform double in [0, 1) built from the top 53 bits; reproducible across
/// standard libraries unlike std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng);

/// Points drawn uniformly from a disc of `radius_miles` around `center`
/// using a local equirectangular approximation.
std::vector<GeoPoint> jitter_coordinates(GeoPoint center, int count, double radius_miles,
                                         std::mt19937_64& rng);

/// Great-circle-free planar distance in miles under the same approximation.
double local_distance_miles(GeoPoint a, GeoPoint b);

FetchResult fetch_tiles(MapsClient& client, std::span<const City> cities, const FetchConfig& config);

}  // namespace semaforge
