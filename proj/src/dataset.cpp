#include "semaforge/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "semaforge/error.hpp"
#include "semaforge/io.hpp"

namespace semaforge {

namespace fs = std::filesystem;
using nlohmann::json;

json palette_to_json(const Palette& palette) {
  json out = json::array();
  for (const auto& e : palette.entries()) {
    out.push_back({{"name", e.name}, {"color", {e.color.r, e.color.g, e.color.b}}});
  }
  return out;
}

Palette palette_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("palette must be an array");
  std::vector<PaletteEntry> entries;
  for (const auto& e : j) {
    const auto& c = e.at("color");
    if (!c.is_array() || c.size() != 3) throw ValidationError("palette color must be [r, g, b]");
    entries.push_back({e.at("name").get<std::string>(),
                       {c[0].get<std::uint8_t>(), c[1].get<std::uint8_t>(), c[2].get<std::uint8_t>()}});
  }
  return Palette(std::move(entries));
}

json DatasetManifest::to_json() const {
  json samples_j = json::array();
  for (const auto& s : samples) {
    json e = {{"id", s.id}, {"split", to_string(s.split)}, {"city", s.city}};
    if (s.geo) e["geo"] = {{"latitude", s.geo->latitude}, {"longitude", s.geo->longitude}};
    samples_j.push_back(e);
  }
  json rejected_j = json::array();
  for (const auto& [id, reason] : rejected) rejected_j.push_back({{"id", id}, {"reason", to_string(reason)}});
  json failures_j = json::array();
  for (const auto& f : failures) {
    failures_j.push_back({{"id", f.source_id},
                          {"latitude", f.coordinate.latitude},
                          {"longitude", f.coordinate.longitude},
                          {"reason", f.reason}});
  }
  return {{"palette", palette_to_json(palette)},
          {"samples", samples_j},
          {"curation", {{"kept", samples.size()}, {"rejected", rejected_j}}},
          {"fetch_failures", failures_j}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  if (j.contains("palette")) m.palette = palette_from_json(j.at("palette"));
  for (const auto& e : j.value("samples", json::array())) {
    ManifestEntry entry{e.at("id").get<std::string>(), split_from_string(e.at("split").get<std::string>()),
                        e.value("city", std::string()), std::nullopt};
    if (e.contains("geo")) entry.geo = GeoPoint{e["geo"].at("latitude"), e["geo"].at("longitude")};
    m.samples.push_back(std::move(entry));
  }
  if (j.contains("curation")) {
    for (const auto& r : j["curation"].value("rejected", json::array())) {
      const auto reason = r.at("reason").get<std::string>();
      RejectReason rr = RejectReason::near_duplicate;
      if (reason == "non-urban") rr = RejectReason::non_urban;
      else if (reason == "stitch-artifact") rr = RejectReason::stitch_artifact;
      m.rejected.emplace_back(r.at("id").get<std::string>(), rr);
    }
  }
  for (const auto& f : j.value("fetch_failures", json::array())) {
    m.failures.push_back({f.at("id").get<std::string>(), GeoPoint{f.at("latitude"), f.at("longitude")},
                          f.value("reason", std::string())});
  }
  return m;
}

DatasetManifest write_dataset(const fs::path& root, const std::vector<PairedSample>& samples, double val_fraction,
                              std::uint64_t seed, const CurationReport* report,
                              const std::vector<FetchFailure>* failures) {
  if (samples.empty()) throw EmptyDatasetError("no samples to write");
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw InvalidArgument("val_fraction must lie in [0, 1)");
  DatasetManifest manifest;
  manifest.palette = samples.front().map.palette();

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = std::min(static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i)), i - 1);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(samples.size())));
  std::vector<Split> splits(samples.size(), Split::train);
  for (std::size_t i = 0; i < n_val && i < order.size(); ++i) splits[order[i]] = Split::val;

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    validate_sample(s);
    if (!(s.map.palette() == manifest.palette)) throw ValidationError("samples use different palettes");
    const fs::path dir = root / to_string(splits[i]);
    io::write_map_png(dir / "maps" / (s.source_id + ".png"), s.map);
    io::write_png(dir / "images" / (s.source_id + ".png"), s.image);
    manifest.samples.push_back({s.source_id, splits[i], s.city, s.geo});
  }
  std::sort(manifest.samples.begin(), manifest.samples.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  if (report) manifest.rejected = report->rejected;
  if (failures) manifest.failures = *failures;
  io::write_text(root / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

DatasetManifest load_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.json";
  if (fs::exists(path)) {
    try {
      return DatasetManifest::from_json(json::parse(io::read_text(path)));
    } catch (const json::exception& e) {
      throw ValidationError("invalid manifest " + path.string() + ": " + e.what());
    }
  }
  // No manifest: discover samples from the directory layout.
  DatasetManifest m;
  for (Split split : {Split::train, Split::val}) {
    const fs::path maps = root / to_string(split) / "maps";
    if (!fs::is_directory(maps)) continue;
    for (const auto& e : fs::directory_iterator(maps)) {
      if (e.path().extension() == ".png") m.samples.push_back({e.path().stem().string(), split, {}, {}});
    }
  }
  std::sort(m.samples.begin(), m.samples.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  return m;
}

std::vector<PairedSample> load_dataset(const fs::path& root, std::optional<Split> split) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " does not exist");
  const auto manifest = load_manifest(root);
  std::vector<PairedSample> out;
  for (const auto& e : manifest.samples) {
    if (split && e.split != *split) continue;
    const fs::path dir = root / to_string(e.split);
    PairedSample s;
    s.map = io::read_map_png(dir / "maps" / (e.id + ".png"), manifest.palette);
    s.image = io::read_png(dir / "images" / (e.id + ".png"), 3);
    s.source_id = e.id;
    s.city = e.city;
    s.geo = e.geo;
    validate_sample(s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace semaforge
