#include "semaforge/config.hpp"

#include <algorithm>

#include "semaforge/error.hpp"
#include "semaforge/io.hpp"

namespace semaforge {

namespace fs = std::filesystem;
using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& section) {
  if (!j.is_object()) throw ValidationError(section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError("unknown key '" + key + "' in " + section);
    }
  }
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

DataConfig data_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"source", "count", "size", "val_fraction", "cities", "perturbations", "radius_miles", "zoom",
                       "duplicate_threshold", "non_urban", "stitch_artifact"},
                      "data");
  DataConfig d;
  d.source = j.value("source", d.source);
  if (d.source != "synthetic" && d.source != "stub-tiles" && d.source != "maps") {
    throw ValidationError("data.source must be synthetic, stub-tiles or maps");
  }
  d.count = j.value("count", d.count);
  d.size = j.value("size", d.size);
  d.val_fraction = j.value("val_fraction", d.val_fraction);
  d.perturbations = j.value("perturbations", d.perturbations);
  d.radius_miles = j.value("radius_miles", d.radius_miles);
  d.zoom = j.value("zoom", d.zoom);
  d.curation.duplicate_threshold = j.value("duplicate_threshold", d.curation.duplicate_threshold);
  for (const auto& id : j.value("non_urban", json::array())) d.curation.non_urban.insert(id.get<std::string>());
  for (const auto& id : j.value("stitch_artifact", json::array())) {
    d.curation.stitch_artifact.insert(id.get<std::string>());
  }
  for (const auto& c : j.value("cities", json::array())) {
    reject_unknown_keys(c, {"name", "latitude", "longitude"}, "data.cities[]");
    d.cities.push_back({c.at("name").get<std::string>(), {c.at("latitude"), c.at("longitude")}});
  }
  if (d.count < 1 || d.size < 8) throw ValidationError("data.count must be positive and data.size at least 8");
  if (!(d.val_fraction >= 0.0 && d.val_fraction < 1.0)) throw ValidationError("data.val_fraction must be in [0, 1)");
  return d;
}

MetricsConfig metrics_from_json(const json& j, const fs::path& base) {
  reject_unknown_keys(j, {"patch", "stride", "min_clean_fraction", "n_examples", "embedder"}, "metrics");
  MetricsConfig m;
  m.protocol.patch = j.value("patch", m.protocol.patch);
  m.protocol.stride = j.value("stride", m.protocol.stride);
  m.protocol.min_clean_fraction = j.value("min_clean_fraction", m.protocol.min_clean_fraction);
  m.protocol.n_examples = j.value("n_examples", m.protocol.n_examples);
  m.embedder = j.value("embedder", m.embedder);
  if (m.embedder != "random-conv") m.embedder = resolve(base, m.embedder).string();
  return m;
}

ServiceConfig service_from_json(const json& j, const fs::path& base) {
  reject_unknown_keys(j, {"host", "port", "checkpoints", "detector", "ui"}, "service");
  ServiceConfig s;
  s.host = j.value("host", s.host);
  s.port = j.value("port", s.port);
  if (j.contains("checkpoints")) s.checkpoints = resolve(base, j.at("checkpoints").get<std::string>());
  if (j.contains("detector")) s.detector = resolve(base, j.at("detector").get<std::string>());
  if (j.contains("ui")) s.ui = resolve(base, j.at("ui").get<std::string>());
  if (s.port < 0 || s.port > 65535) throw ValidationError("service.port out of range");
  return s;
}

RobustnessConfig robustness_from_json(const json& j, const fs::path& base) {
  reject_unknown_keys(j, {"detectors", "eval", "per_class", "patch", "val_fraction", "forgeries", "pristine", "grids", "out"},
                      "robustness");
  RobustnessConfig r;
  for (const auto& d : j.value("detectors", json::array())) {
    reject_unknown_keys(d, {"label", "checkpoint", "train"}, "robustness.detectors[]");
    BenchDetector b;
    b.label = d.at("label").get<std::string>();
    if (d.contains("checkpoint")) b.checkpoint = resolve(base, d.at("checkpoint").get<std::string>());
    if (d.contains("train")) b.train = forensics::DetectorConfig::from_json(d.at("train"));
    if (b.checkpoint.empty() == !b.train.has_value()) {
      throw ValidationError("robustness detector '" + b.label + "' needs exactly one of checkpoint or train");
    }
    r.detectors.push_back(std::move(b));
  }
  r.eval = j.value("eval", r.eval);
  if (r.eval != "synthetic" && r.eval != "forgeries") throw ValidationError("robustness.eval must be synthetic or forgeries");
  r.per_class = j.value("per_class", r.per_class);
  r.patch = j.value("patch", r.patch);
  r.val_fraction = j.value("val_fraction", r.val_fraction);
  for (const auto& p : j.value("forgeries", json::array())) r.forgeries.push_back(resolve(base, p.get<std::string>()));
  for (const auto& p : j.value("pristine", json::array())) r.pristine.push_back(resolve(base, p.get<std::string>()));
  for (const auto& g : j.value("grids", json::array())) {
    reject_unknown_keys(g, {"kind", "parameters"}, "robustness.grids[]");
    forensics::TransformGrid grid{forensics::transform_kind_from_string(g.at("kind")),
                                  g.at("parameters").get<std::vector<double>>()};
    if (grid.parameters.empty() || !std::is_sorted(grid.parameters.begin(), grid.parameters.end())) {
      throw ValidationError("robustness grid parameters must be non-empty and ascending");
    }
    r.grids.push_back(std::move(grid));
  }
  if (j.contains("out")) r.out = resolve(base, j.at("out").get<std::string>());
  if (r.per_class < 2 || r.patch < 8) throw ValidationError("robustness.per_class must be >= 2 and patch >= 8");
  if (!(r.val_fraction > 0.0 && r.val_fraction < 1.0)) throw ValidationError("robustness.val_fraction must be in (0, 1)");
  if (r.eval == "forgeries" && r.forgeries.empty()) throw ValidationError("robustness.forgeries is empty");
  return r;
}

json robustness_to_json(const RobustnessConfig& r) {
  json detectors = json::array();
  for (const auto& d : r.detectors) {
    json j = {{"label", d.label}};
    if (!d.checkpoint.empty()) j["checkpoint"] = d.checkpoint.string();
    if (d.train) j["train"] = d.train->to_json();
    detectors.push_back(j);
  }
  json grids = json::array();
  for (const auto& g : r.grids) grids.push_back({{"kind", forensics::to_string(g.kind)}, {"parameters", g.parameters}});
  json forgeries = json::array(), pristine = json::array();
  for (const auto& p : r.forgeries) forgeries.push_back(p.string());
  for (const auto& p : r.pristine) pristine.push_back(p.string());
  return {{"detectors", detectors}, {"eval", r.eval},         {"per_class", r.per_class}, {"patch", r.patch},
          {"val_fraction", r.val_fraction}, {"forgeries", forgeries}, {"pristine", pristine}, {"grids", grids},
          {"out", r.out.string()}};
}

}  // namespace

ProjectConfig ProjectConfig::from_json(const json& j, const fs::path& base) {
  reject_unknown_keys(j,
                      {"dataset_root", "architecture", "profile", "seed", "data", "training", "stages", "blend",
                       "detector", "metrics", "service", "robustness"},
                      "project config");
  try {
    ProjectConfig c;
    if (j.contains("dataset_root")) c.dataset_root = resolve(base, j.at("dataset_root").get<std::string>());
    if (j.contains("architecture")) c.architecture = gan::architecture_from_string(j.at("architecture"));
    if (j.contains("profile")) c.profile = gan::profile_from_string(j.at("profile"));
    c.seed = j.value("seed", c.seed);
    if (j.contains("data")) c.data = data_from_json(j.at("data"));
    if (j.contains("training")) c.training = training::TrainConfig::from_json(j.at("training"));
    for (const auto& s : j.value("stages", json::array())) c.stages.push_back(training::TrainConfig::from_json(s));
    if (!c.stages.empty()) training::validate_stage_order(c.stages);
    if (j.contains("blend")) c.blend = manip::BlendConfig::from_json(j.at("blend"));
    if (j.contains("detector")) c.detector = forensics::DetectorConfig::from_json(j.at("detector"));
    if (j.contains("metrics")) c.metrics = metrics_from_json(j.at("metrics"), base);
    if (j.contains("service")) c.service = service_from_json(j.at("service"), base);
    if (j.contains("robustness")) c.robustness = robustness_from_json(j.at("robustness"), base);
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid project config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ValidationError(e.what());
  }
}

ProjectConfig ProjectConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw NotFoundError("config file " + path.string() + " not found");
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

json ProjectConfig::to_json() const {
  json stages_j = json::array();
  for (const auto& s : stages) stages_j.push_back(s.to_json());
  json cities = json::array();
  for (const auto& c : data.cities) {
    cities.push_back({{"name", c.name}, {"latitude", c.center.latitude}, {"longitude", c.center.longitude}});
  }
  return {{"dataset_root", dataset_root.string()},
          {"architecture", gan::to_string(architecture)},
          {"profile", gan::to_string(profile)},
          {"seed", seed},
          {"data",
           {{"source", data.source},
            {"count", data.count},
            {"size", data.size},
            {"val_fraction", data.val_fraction},
            {"cities", cities},
            {"perturbations", data.perturbations},
            {"radius_miles", data.radius_miles},
            {"zoom", data.zoom},
            {"duplicate_threshold", data.curation.duplicate_threshold},
            {"non_urban", data.curation.non_urban},
            {"stitch_artifact", data.curation.stitch_artifact}}},
          {"training", training.to_json()},
          {"stages", stages_j},
          {"blend", blend.to_json()},
          {"detector", detector.to_json()},
          {"metrics",
           {{"patch", metrics.protocol.patch},
            {"stride", metrics.protocol.stride},
            {"min_clean_fraction", metrics.protocol.min_clean_fraction},
            {"n_examples", metrics.protocol.n_examples},
            {"embedder", metrics.embedder}}},
          {"service",
           {{"host", service.host},
            {"port", service.port},
            {"checkpoints", service.checkpoints.string()},
            {"detector", service.detector.string()},
            {"ui", service.ui.string()}}},
          {"robustness", robustness_to_json(robustness)}};
}

void ProjectConfig::validate_paths() const {
  if (!dataset_root.empty() && !fs::exists(dataset_root)) {
    throw ValidationError("dataset_root " + dataset_root.string() + " does not exist");
  }
}

}  // namespace semaforge
