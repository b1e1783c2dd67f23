#include "semaforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "semaforge/error.hpp"
#include "semaforge/io.hpp"
#include "semaforge/log.hpp"
#include "semaforge/maps_client.hpp"

namespace semaforge {

void validate_sample(const PairedSample& sample) {
  if (sample.map.height() != sample.image.height() || sample.map.width() != sample.image.width()) {
    throw ShapeError("sample " + sample.source_id + ": map and image dimensions differ");
  }
  const auto n = sample.map.palette().size();
  for (auto k : sample.map.classes()) {
    if (k >= n) throw ShapeError("sample " + sample.source_id + ": class index outside palette");
  }
}

std::vector<WindowOrigin> window_origins(int height, int width, int tile, int stride) {
  if (tile < 1) throw InvalidArgument("tile must be at least 1 pixel");
  if (stride < 1) throw InvalidArgument("stride must be at least 1 pixel");
  if (tile > height || tile > width) {
    throw ShapeError("tile " + std::to_string(tile) + " larger than raster " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  const int rows = (height - tile) / stride + 1;
  const int cols = (width - tile) / stride + 1;
  std::vector<WindowOrigin> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out.push_back({r * stride, c * stride});
  }
  return out;
}

std::vector<ImageTile> tile_image(const ImageTile& raster, int tile, int stride) {
  std::vector<ImageTile> out;
  for (auto o : window_origins(raster.height(), raster.width(), tile, stride)) {
    out.push_back(raster.crop(o.y, o.x, tile, tile));
  }
  return out;
}

std::vector<SemanticMap> tile_map(const SemanticMap& map, int tile, int stride) {
  std::vector<SemanticMap> out;
  for (auto o : window_origins(map.height(), map.width(), tile, stride)) {
    out.push_back(map.crop(o.y, o.x, tile, tile));
  }
  return out;
}

const char* to_string(Split split) { return split == Split::train ? "train" : "val"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  throw InvalidArgument("unknown split '" + s + "'");
}

std::size_t PatchPlan::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(patches.begin(), patches.end(), [&](const PatchRef& p) { return p.split == split; }));
}

std::size_t PatchPlan::count(Split split, PatchLabel label) const {
  return static_cast<std::size_t>(std::count_if(patches.begin(), patches.end(), [&](const PatchRef& p) {
    return p.split == split && p.label == label;
  }));
}

PatchPlan plan_patch_dataset(std::span<const RasterShape> pristine, std::span<const RasterShape> generated,
                             int patch, double val_fraction, std::uint64_t seed) {
  if (pristine.empty() && generated.empty()) throw EmptyDatasetError("no source images");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidArgument("val_fraction must lie in (0, 1)");
  }
  if (patch < 1) throw InvalidArgument("patch size must be positive");

  const std::size_t paired = std::min(pristine.size(), generated.size());
  for (std::size_t i = 0; i < paired; ++i) {
    if (pristine[i].height != generated[i].height || pristine[i].width != generated[i].width) {
      throw ShapeError("pristine and generated image " + std::to_string(i) + " differ in size");
    }
  }

  // Split units: pair i holds pristine i and generated i; unpaired leftovers
  // form singleton units.
  const std::size_t units = std::max(pristine.size(), generated.size());
  std::vector<std::size_t> order(units);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = units; i > 1; --i) {  // Fisher-Yates with a portable draw
    const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(units)));
  if (units >= 2) n_val = std::clamp<std::size_t>(n_val, 1, units - 1);
  n_val = std::min(n_val, units);
  std::vector<Split> unit_split(units, Split::train);
  for (std::size_t i = 0; i < n_val; ++i) unit_split[order[i]] = Split::val;

  PatchPlan plan;
  plan.patch_size = patch;
  plan.stride = patch;
  auto emit = [&](const RasterShape& s, int source, PatchLabel label, Split split) {
    for (auto o : window_origins(s.height, s.width, patch, patch)) {
      plan.patches.push_back({source, o.y, o.x, label, split});
    }
  };
  for (std::size_t i = 0; i < pristine.size(); ++i) {
    emit(pristine[i], static_cast<int>(i), PatchLabel::pristine, unit_split[i]);
  }
  for (std::size_t i = 0; i < generated.size(); ++i) {
    emit(generated[i], static_cast<int>(pristine.size() + i), PatchLabel::generated, unit_split[i]);
  }
  return plan;
}

PatchDataset::PatchDataset(std::vector<Image> sources, PatchPlan plan)
    : sources_(std::move(sources)), plan_(std::move(plan)) {
  for (const auto& p : plan_.patches) {
    if (p.source < 0 || static_cast<std::size_t>(p.source) >= sources_.size()) {
      throw InvalidArgument("patch references a missing source");
    }
    const auto& s = sources_[p.source];
    if (p.y + plan_.patch_size > s.height() || p.x + plan_.patch_size > s.width()) {
      throw ShapeError("patch outside its source raster");
    }
  }
}

PatchDataset PatchDataset::from_patches(std::vector<Image> patches, std::vector<PatchLabel> labels,
                                        std::vector<Split> splits) {
  if (patches.empty()) throw EmptyDatasetError("no patches");
  if (labels.size() != patches.size() || splits.size() != patches.size()) {
    throw InvalidArgument("patches, labels and splits must have equal length");
  }
  PatchPlan plan;
  plan.patch_size = patches.front().height();
  plan.stride = plan.patch_size;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].height() != plan.patch_size || patches[i].width() != plan.patch_size) {
      throw ShapeError("patches must be square and equal-sized");
    }
    plan.patches.push_back({static_cast<int>(i), 0, 0, labels[i], splits[i]});
  }
  return PatchDataset(std::move(patches), std::move(plan));
}

Image PatchDataset::patch(std::size_t i) const {
  const auto& p = plan_.patches.at(i);
  return sources_[p.source].crop(p.y, p.x, plan_.patch_size, plan_.patch_size);
}

std::vector<std::size_t> PatchDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < plan_.patches.size(); ++i) {
    if (plan_.patches[i].split == split) out.push_back(i);
  }
  return out;
}

PatchDataset build_patch_dataset(std::vector<ImageTile> pristine, std::vector<ImageTile> generated, int patch,
                                 double val_fraction, std::uint64_t seed) {
  if (pristine.empty() && generated.empty()) throw EmptyDatasetError("no source images");
  std::vector<RasterShape> ps, gs;
  for (const auto& im : pristine) ps.push_back({im.height(), im.width()});
  for (const auto& im : generated) gs.push_back({im.height(), im.width()});
  auto plan = plan_patch_dataset(ps, gs, patch, val_fraction, seed);
  std::vector<Image> sources = std::move(pristine);
  sources.insert(sources.end(), std::make_move_iterator(generated.begin()),
                 std::make_move_iterator(generated.end()));
  return PatchDataset(std::move(sources), std::move(plan));
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::near_duplicate: return "near-duplicate";
    case RejectReason::non_urban: return "non-urban";
    case RejectReason::stitch_artifact: return "stitch-artifact";
  }
  return "unknown";
}

double mean_absolute_difference(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("mean_absolute_difference: shape mismatch");
  if (a.empty()) return 0.0;
  double acc = 0.0;
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) acc += std::abs(double(pa[i]) - double(pb[i]));
  return acc / static_cast<double>(pa.size());
}

std::pair<std::vector<PairedSample>, CurationReport> curate(std::vector<PairedSample> samples,
                                                            const CurationConfig& config) {
  CurationReport report;
  std::vector<PairedSample> kept;
  for (auto& s : samples) {
    if (config.stitch_artifact.contains(s.source_id)) {
      report.rejected.emplace_back(s.source_id, RejectReason::stitch_artifact);
      continue;
    }
    if (config.non_urban.contains(s.source_id)) {
      report.rejected.emplace_back(s.source_id, RejectReason::non_urban);
      continue;
    }
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const PairedSample& k) {
      return k.city == s.city && k.image.same_shape(s.image) &&
             mean_absolute_difference(k.image, s.image) < config.duplicate_threshold;
    });
    if (duplicate) {
      report.rejected.emplace_back(s.source_id, RejectReason::near_duplicate);
      continue;
    }
    kept.push_back(std::move(s));
  }
  report.kept = kept.size();
  return {std::move(kept), report};
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace {
constexpr double kMilesPerDegree = 3958.8 * std::numbers::pi / 180.0;
}

std::vector<GeoPoint> jitter_coordinates(GeoPoint center, int count, double radius_miles, std::mt19937_64& rng) {
  if (radius_miles < 0.0) throw InvalidArgument("radius must be non-negative");
  std::vector<GeoPoint> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  const double cos_lat = std::cos(center.latitude * std::numbers::pi / 180.0);
  for (int i = 0; i < count; ++i) {
    const double r = radius_miles * std::sqrt(unit_uniform(rng));
    const double theta = 2.0 * std::numbers::pi * unit_uniform(rng);
    if (radius_miles == 0.0) {
      out.push_back(center);
      continue;
    }
    out.push_back({center.latitude + r * std::cos(theta) / kMilesPerDegree,
                   center.longitude + r * std::sin(theta) / (kMilesPerDegree * cos_lat)});
  }
  return out;
}

double local_distance_miles(GeoPoint a, GeoPoint b) {
  const double mid = 0.5 * (a.latitude + b.latitude) * std::numbers::pi / 180.0;
  const double dy = (a.latitude - b.latitude) * kMilesPerDegree;
  const double dx = (a.longitude - b.longitude) * kMilesPerDegree * std::cos(mid);
  return std::hypot(dx, dy);
}

namespace {

std::vector<std::uint8_t> fetch_with_retry(MapsClient& client, GeoPoint p, TileStyle style,
                                           const FetchConfig& config) {
  auto delay = config.backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return client.get_tile(p.latitude, p.longitude, config.zoom, style);
    } catch (const std::exception& e) {
      if (attempt >= config.attempts) throw;
      log_warn("tile fetch (", p.latitude, ", ", p.longitude, ") attempt ", attempt, " failed: ", e.what());
      if (delay.count() > 0) std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
}

}  // namespace

FetchResult fetch_tiles(MapsClient& client, std::span<const City> cities, const FetchConfig& config) {
  if (config.attempts < 1) throw InvalidArgument("attempts must be at least 1");
  FetchResult result;
  std::mt19937_64 rng(config.seed);
  for (const auto& city : cities) {
    const auto points = jitter_coordinates(city.center, config.perturbations, config.radius_miles, rng);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::string id = city.name + "_" + std::to_string(i);
      try {
        const auto road = fetch_with_retry(client, points[i], TileStyle::roadmap, config);
        const auto sat = fetch_with_retry(client, points[i], TileStyle::satellite, config);
        PairedSample s;
        s.map = SemanticMap::from_rgb_nearest(io::decode_png(road, 3), config.palette);
        s.image = io::decode_png(sat, 3);
        s.source_id = id;
        s.city = city.name;
        s.geo = points[i];
        validate_sample(s);
        result.samples.push_back(std::move(s));
      } catch (const std::exception& e) {
        log_warn("skipping ", id, ": ", e.what());
        result.failures.push_back({id, points[i], e.what()});
      }
    }
  }
  return result;
}

}  // namespace semaforge
