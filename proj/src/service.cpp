#include "semaforge/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <mutex>
#include <optional>
#include <regex>

#include "semaforge/dataset.hpp"
#include "semaforge/error.hpp"
#include "semaforge/forensics/detector.hpp"
#include "semaforge/forensics/heatmap.hpp"
#include "semaforge/io.hpp"
#include "semaforge/log.hpp"
#include "semaforge/manipulation.hpp"
#include "semaforge/training.hpp"

namespace semaforge::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class BadRequest : public Error {
 public:
  BadRequest(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
  const char* code() const noexcept override { return code_.c_str(); }

 private:
  std::string code_;
};

Response error_response(int status, const std::string& code, const std::string& message) {
  return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

const json& field(const json& body, const char* name) {
  if (!body.contains(name)) throw BadRequest("missing_field", std::string("missing field '") + name + "'");
  return body.at(name);
}

std::string string_field(const json& body, const char* name) {
  const auto& v = field(body, name);
  if (!v.is_string()) throw BadRequest("bad_field", std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

Image png_field(const json& body, const char* name, int channels = 3) {
  return io::decode_png(io::base64_decode(string_field(body, name)), channels);
}

bool is_local_origin(const std::string& origin) {
  for (const char* prefix : {"http://127.0.0.1", "http://localhost", "http://[::1]"}) {
    const std::string p(prefix);
    if (origin.compare(0, p.size(), p) == 0 && (origin.size() == p.size() || origin[p.size()] == ':')) return true;
  }
  return false;
}

std::string png_b64(const Image& image) { return io::base64_encode(io::encode_png(image)); }

json read_spec(const fs::path& dir) {
  try {
    return json::parse(io::read_text(dir / "spec.json"));
  } catch (const json::exception& e) {
    throw ValidationError("unreadable spec.json in " + dir.string());
  }
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  fs::path dataset_root;
  httplib::Server server;
  bool bound = false;

  struct TranslatorSlot {
    std::mutex mutex;
    std::string id;
    std::unique_ptr<gan::TranslatorModel> model;
  } translator;

  struct DetectorSlot {
    std::mutex mutex;
    std::string id;
    std::unique_ptr<forensics::DetectorModel> model;
  } detector;

  std::mutex session_mutex;
  std::string last_sample;
  std::optional<json> last_forgery;

  fs::path checkpoint_dir(const std::string& id, const char* kind) const {
    const auto ids = gan::list_checkpoints(config.checkpoints);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw NotFoundError("unknown checkpoint '" + id + "'");
    const auto dir = config.checkpoints / id;
    if (read_spec(dir).value("kind", std::string("translator")) != kind) {
      throw BadRequest("wrong_checkpoint_kind", "checkpoint '" + id + "' is not a " + kind);
    }
    return dir;
  }

  /// Caller holds translator.mutex.
  gan::TranslatorModel& translator_for(const std::string& id) {
    if (translator.model && translator.id == id) return *translator.model;
    translator.model = std::make_unique<gan::TranslatorModel>(gan::TranslatorModel::load(checkpoint_dir(id, "translator")));
    translator.id = id;
    log_info("loaded translator ", id);
    return *translator.model;
  }

  /// Caller holds detector.mutex.
  forensics::DetectorModel& detector_for(const std::string& id) {
    fs::path dir;
    if (!id.empty()) {
      dir = checkpoint_dir(id, "detector");
    } else if (!config.detector.empty()) {
      dir = config.detector;
    } else {
      throw NotFoundError("no detector checkpoint configured");
    }
    const auto key = dir.string();
    if (detector.model && detector.id == key) return *detector.model;
    detector.model = std::make_unique<forensics::DetectorModel>(forensics::DetectorModel::load(dir));
    detector.id = key;
    return *detector.model;
  }

  SemanticMap map_field(const json& body, const char* name, const Palette& palette) {
    return SemanticMap::from_rgb_exact(png_field(body, name), palette);
  }

  json generate(const json& body) {
    const auto id = string_field(body, "checkpoint");
    std::lock_guard lock(translator.mutex);
    auto& model = translator_for(id);
    const auto map = map_field(body, "map", model.spec().palette);
    return {{"checkpoint", id}, {"image", png_b64(training::generate(model, map))}};
  }

  json forge(const json& body) {
    const auto id = string_field(body, "checkpoint");
    manip::BlendConfig blend;
    if (body.contains("blend")) blend = manip::BlendConfig::from_json(body.at("blend"));
    json out;
    {
      std::lock_guard lock(translator.mutex);
      auto& model = translator_for(id);
      const auto& palette = model.spec().palette;
      PairedSample sample;
      sample.map = map_field(body, "map", palette);
      sample.image = png_field(body, "image");
      sample.source_id = body.value("source_id", std::string("request"));
      const auto tampered = map_field(body, "tampered", palette);
      // Epoch-zero timestamps keep responses a pure function of the request.
      const auto record = manip::forge(model, sample, tampered, blend, id, /*deterministic=*/true);
      out = {{"blended", png_b64(record.blended)},
             {"mask", png_b64(record.mask.mask.to_image())},
             {"generated", png_b64(record.generated)},
             {"provenance", record.provenance()}};
    }
    std::lock_guard lock(session_mutex);
    last_forgery = out.at("provenance");
    return out;
  }

  json detect(const json& body) {
    const auto image = png_field(body, "image");
    const auto& s = field(body, "stride");
    if (!s.is_number_integer()) throw BadRequest("bad_field", "stride must be an integer");
    const int stride = s.get<int>();
    std::lock_guard lock(detector.mutex);
    auto& model = detector_for(body.value("checkpoint", std::string()));
    const int patch = model.spec().patch_size;
    const auto h = forensics::heatmap([&](std::span<const Image> p) { return model.probabilities(p); }, image,
                                      patch, stride);
    return {{"height", h.height},
            {"width", h.width},
            {"patch", patch},
            {"stride", stride},
            {"scores", io::base64_encode(io::encode_npy(h.to_image()))},
            {"heatmap", png_b64(h.render())}};
  }

  json samples() const {
    json out = json::array();
    if (dataset_root.empty() || !fs::is_directory(dataset_root)) return out;
    const auto manifest = load_manifest(dataset_root);
    auto entries = manifest.samples;
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    const auto palette = palette_to_json(manifest.palette);
    for (const auto& e : entries) {
      json j = {{"id", e.id}, {"split", to_string(e.split)}, {"city", e.city}, {"palette", palette}};
      if (e.geo) j["geo"] = {{"latitude", e.geo->latitude}, {"longitude", e.geo->longitude}};
      out.push_back(j);
    }
    return out;
  }

  json sample(const std::string& id) {
    if (dataset_root.empty() || !fs::is_directory(dataset_root)) throw NotFoundError("no dataset configured");
    for (const auto& s : load_dataset(dataset_root)) {
      if (s.source_id != id) continue;
      {
        std::lock_guard lock(session_mutex);
        last_sample = id;
      }
      return {{"id", id},
              {"city", s.city},
              {"palette", palette_to_json(s.map.palette())},
              {"map", png_b64(s.map.to_rgb())},
              {"image", png_b64(s.image)}};
    }
    throw NotFoundError("unknown sample '" + id + "'");
  }

  json checkpoints() const {
    json out = json::array();
    for (const auto& id : gan::list_checkpoints(config.checkpoints)) {
      const auto spec = read_spec(config.checkpoints / id);
      json j = {{"id", id}, {"kind", spec.value("kind", std::string("translator"))}};
      for (const char* k : {"architecture", "profile", "tile_size", "palette", "patch_size", "training_mode"}) {
        if (spec.contains(k)) j[k] = spec.at(k);
      }
      out.push_back(j);
    }
    return out;
  }

  json session() {
    std::lock_guard lock(session_mutex);
    json j = {{"translator", translator.id}, {"sample", last_sample}};
    j["last_forgery"] = last_forgery ? *last_forgery : json(nullptr);
    return j;
  }
};

Service::Service(ServiceConfig config, fs::path dataset_root) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  impl_->dataset_root = std::move(dataset_root);
  auto& svr = impl_->server;
  svr.set_payload_max_length(impl_->config.max_body_bytes);
  svr.set_default_headers({{"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  // CORS for UIs served from the local machine only.
  svr.set_post_routing_handler([](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (is_local_origin(origin)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  });

  auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  svr.Get(R"(/api/.*)", bridge);
  svr.Post(R"(/api/.*)", bridge);
  svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  if (!impl_->config.ui.empty() && fs::is_directory(impl_->config.ui)) {
    svr.set_mount_point("/ui", impl_->config.ui.string());
  }
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    const auto r = error_response(500, "internal", "unhandled error");
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  });
}

Service::~Service() { stop(); }

Response Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  static const std::regex sample_path(R"(/api/samples/([A-Za-z0-9._-]+))");
  try {
    auto parse = [&] {
      try {
        auto j = json::parse(body);
        if (!j.is_object()) throw BadRequest("bad_json", "request body must be a JSON object");
        return j;
      } catch (const json::parse_error& e) {
        throw BadRequest("bad_json", std::string("request body is not JSON: ") + e.what());
      }
    };
    std::smatch m;
    if (method == "POST") {
      if (path == "/api/generate") return {200, impl_->generate(parse())};
      if (path == "/api/forge") return {200, impl_->forge(parse())};
      if (path == "/api/detect") return {200, impl_->detect(parse())};
    } else if (method == "GET") {
      if (path == "/api/samples") return {200, impl_->samples()};
      if (std::regex_match(path, m, sample_path)) return {200, impl_->sample(m[1])};
      if (path == "/api/checkpoints") return {200, impl_->checkpoints()};
      if (path == "/api/schema") return {200, schema()};
      if (path == "/api/session") return {200, impl_->session()};
    }
    return error_response(404, "no_route", method + " " + path + " is not an endpoint");
  } catch (const NotFoundError& e) {
    return error_response(404, e.code(), e.what());
  } catch (const IoError& e) {
    return error_response(500, e.code(), e.what());
  } catch (const Error& e) {
    return error_response(400, e.code(), e.what());
  } catch (const json::exception& e) {
    return error_response(400, "bad_field", e.what());
  } catch (const std::exception& e) {
    log(LogLevel::error, "request ", path, " failed: ", e.what());
    return error_response(500, "internal", e.what());
  }
}

int Service::bind() {
  const int port = impl_->config.port == 0 ? impl_->server.bind_to_any_port(impl_->config.host)
                                           : (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)
                                                  ? impl_->config.port
                                                  : -1);
  if (port < 0) throw IoError("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  impl_->bound = true;
  return port;
}

void Service::serve() {
  if (!impl_->bound) bind();
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

json Service::schema() {
  auto png = json{{"type", "string"}, {"format", "base64 PNG"}};
  auto error = json{{"type", "object"},
                    {"properties", {{"error", {{"type", "object"}, {"required", {"code", "message"}}}}}}};
  return {
      {"openapi", "3.0.0"},
      {"info", {{"title", "semaforge"}, {"version", "0.1.0"}}},
      {"paths",
       {{"/api/generate",
         {{"post",
           {{"requestBody", {{"required", {"checkpoint", "map"}}, {"properties", {{"checkpoint", {{"type", "string"}}}, {"map", png}}}}},
            {"responses", {{"200", {{"properties", {{"image", png}}}}}, {"400", error}, {"404", error}}}}}}},
        {"/api/forge",
         {{"post",
           {{"requestBody",
             {{"required", {"checkpoint", "map", "tampered", "image"}},
              {"properties",
               {{"checkpoint", {{"type", "string"}}},
                {"map", png},
                {"tampered", png},
                {"image", png},
                {"blend",
                 {{"type", "object"},
                  {"properties",
                   {{"dilation", {{"type", "integer"}}},
                    {"feather_radius", {{"type", "integer"}}},
                    {"method", {{"enum", {"alpha", "poisson"}}}}}}}}}}}},
            {"responses",
             {{"200", {{"properties", {{"blended", png}, {"mask", png}, {"generated", png}, {"provenance", {{"type", "object"}}}}}}},
              {"400", error},
              {"404", error}}}}}}},
        {"/api/detect",
         {{"post",
           {{"requestBody",
             {{"required", {"image", "stride"}},
              {"properties", {{"image", png}, {"stride", {{"type", "integer"}}}, {"checkpoint", {{"type", "string"}}}}}}},
            {"responses",
             {{"200",
               {{"properties",
                 {{"scores", {{"type", "string"}, {"format", "base64 .npy float32 HxW"}}},
                  {"heatmap", png},
                  {"height", {{"type", "integer"}}},
                  {"width", {{"type", "integer"}}}}}}},
              {"400", error}}}}}}},
        {"/api/samples", {{"get", {{"responses", {{"200", {{"type", "array"}}}}}}}}},
        {"/api/samples/{id}", {{"get", {{"responses", {{"200", {{"properties", {{"map", png}, {"image", png}}}}}, {"404", error}}}}}}},
        {"/api/checkpoints", {{"get", {{"responses", {{"200", {{"type", "array"}}}}}}}}},
        {"/api/session", {{"get", {{"responses", {{"200", {{"type", "object"}}}}}}}}},
        {"/api/schema", {{"get", {{"responses", {{"200", {{"type", "object"}}}}}}}}}}}};
}

}  // namespace semaforge::service
