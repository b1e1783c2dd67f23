#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semaforge/data.hpp"

namespace semaforge {

nlohmann::json palette_to_json(const Palette& palette);
Palette palette_from_json(const nlohmann::json& j);

struct ManifestEntry {
  std::string id;
  Split split = Split::train;
  std::string city;
  std::optional<GeoPoint> geo;
};

/// `<root>/manifest.json`: palette, kept samples with their split and source
/// coordinates, and the curation outcome of rejected ones.
struct DatasetManifest {
  Palette palette = Palette::default_map_palette();
  std::vector<ManifestEntry> samples;
  std::vector<std::pair<std::string, RejectReason>> rejected;
  std::vector<FetchFailure> failures;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

/// Assigns whole samples to val with the given fraction (seeded), train
/// otherwise, and writes `<root>/<split>/{maps,images}/<id>.png` plus the
/// manifest.
DatasetManifest write_dataset(const std::filesystem::path& root, const std::vector<PairedSample>& samples,
                              double val_fraction, std::uint64_t seed, const CurationReport* report = nullptr,
                              const std::vector<FetchFailure>* failures = nullptr);

/// Loads samples of one split (or all when `split` is empty), sorted by id.
/// Falls back to the default palette and directory scan when the manifest
/// is missing.
std::vector<PairedSample> load_dataset(const std::filesystem::path& root,
                                       std::optional<Split> split = std::nullopt);
DatasetManifest load_manifest(const std::filesystem::path& root);

}  // namespace semaforge
