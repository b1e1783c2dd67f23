#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "semaforge/cli.hpp"
#include "semaforge/dataset.hpp"
#include "semaforge/error.hpp"
#include "semaforge/forensics/detector.hpp"
#include "semaforge/forensics/heatmap.hpp"
#include "semaforge/io.hpp"
#include "semaforge/metrics.hpp"
#include "semaforge/service.hpp"
#include "semaforge/synthetic.hpp"
#include "semaforge/training.hpp"

// After the project headers: <resolv.h> defines a `_res` macro that breaks Eigen.
#include <httplib.h>

using namespace semaforge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string b64_png(const Image& img) { return io::base64_encode(io::encode_png(img)); }

Image png_from_b64(const json& v, int channels = 3) {
  return io::decode_png(io::base64_decode(v.get<std::string>()), channels);
}

io::Bytes file_bytes(const fs::path& p) {
  const auto s = io::read_text(p);
  return io::Bytes(s.begin(), s.end());
}

/// One memorized toy translator, one detector and a three-sample dataset,
/// built once for the whole suite.
struct Fixture {
  oracle::TempDir dir{"service"};
  fs::path ckpts, data, translator, detector;
  PairedSample pair;
  SemanticMap tampered;
  double train_ssim = 0.0;

  Fixture() {
    ckpts = dir / "checkpoints";
    data = dir / "data";
    translator = ckpts / "toy-p2p";
    detector = ckpts / "det16";
    auto samples = synth::make_pairs(3, 64, 11);
    write_dataset(data, samples, 0.34, 2);
    pair = samples.front();

    gan::TranslatorModel model(gan::ModelSpec::make(gan::Architecture::pix2pixhd, gan::Profile::toy, 64), 1);
    training::TrainConfig cfg;
    cfg.epochs = 200;
    cfg.memorization_target = 0.6;
    cfg.seed = 1;
    train_ssim = training::finetune(model, {pair}, cfg).final_ssim;
    model.save(translator);

    forensics::DetectorModel det({gan::Profile::toy, 16, forensics::TrainingMode::plain}, 3);
    det.save(detector);

    tampered = pair.map;
    for (int y = 20; y < 36; ++y) {
      for (int x = 24; x < 44; ++x) tampered.at(y, x) = static_cast<std::uint8_t>(pair.map.palette().index_of("water"));
    }
  }

  ServiceConfig config() const {
    ServiceConfig c;
    c.port = 0;
    c.checkpoints = ckpts;
    c.detector = detector;
    return c;
  }

  json forge_body() const {
    return {{"checkpoint", "toy-p2p"},
            {"map", b64_png(pair.map.to_rgb())},
            {"tampered", b64_png(tampered.to_rgb())},
            {"image", b64_png(pair.image)},
            {"source_id", pair.source_id}};
  }
};

Fixture& fx() {
  static Fixture f;
  return f;
}

/// Runs a service on an ephemeral port for the lifetime of the object.
struct Running {
  service::Service svc;
  int port;
  std::thread thread;
  explicit Running(ServiceConfig c, fs::path data = {}) : svc(std::move(c), std::move(data)), port(svc.bind()) {
    thread = std::thread([this] { svc.serve(); });
    httplib::Client probe("127.0.0.1", port);
    for (int i = 0; i < 200 && !probe.Get("/api/schema"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ~Running() {
    svc.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    return c;
  }
};

service::Response call(service::Service& s, const std::string& method, const std::string& path, const json& body) {
  return s.handle(method, path, body.dump());
}

std::string error_code(const service::Response& r) { return r.body.at("error").at("code").get<std::string>(); }

}  // namespace

// ---------------------------------------------------------------------------
// listings

TEST(Listings, FreshRootsAreEmpty) {
  oracle::TempDir empty("svc_empty");
  ServiceConfig c;
  c.port = 0;
  c.checkpoints = empty / "nothing";
  Running r(c, empty / "no-data");
  auto cl = r.client();
  for (const char* path : {"/api/samples", "/api/checkpoints"}) {
    const auto res = cl.Get(path);
    ASSERT_TRUE(res) << path;
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body), json::array()) << path;
  }
}

TEST(Listings, CheckpointsAreSortedWithArchitectureAndPalette) {
  service::Service s(fx().config(), fx().data);
  const auto r = call(s, "GET", "/api/checkpoints", nullptr);
  ASSERT_EQ(r.status, 200);
  ASSERT_EQ(r.body.size(), 2u);
  EXPECT_EQ(r.body[0]["id"], "det16");
  EXPECT_EQ(r.body[0]["kind"], "detector");
  EXPECT_EQ(r.body[1]["id"], "toy-p2p");
  EXPECT_EQ(r.body[1]["kind"], "translator");
  EXPECT_EQ(r.body[1]["architecture"], "pix2pixhd");
  EXPECT_EQ(r.body[1]["palette"], palette_to_json(fx().pair.map.palette()));
}

TEST(Listings, SamplesCarryPaletteAndStableIds) {
  service::Service s(fx().config(), fx().data);
  const auto r = call(s, "GET", "/api/samples", nullptr);
  ASSERT_EQ(r.body.size(), 3u);
  std::vector<std::string> ids;
  for (const auto& e : r.body) {
    ids.push_back(e["id"]);
    EXPECT_EQ(e["palette"], palette_to_json(fx().pair.map.palette()));
  }
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(call(s, "GET", "/api/samples", nullptr).body, r.body);

  const auto one = call(s, "GET", "/api/samples/" + fx().pair.source_id, nullptr);
  ASSERT_EQ(one.status, 200);
  EXPECT_EQ(SemanticMap::from_rgb_exact(png_from_b64(one.body["map"]), fx().pair.map.palette()), fx().pair.map);
  EXPECT_EQ(call(s, "GET", "/api/samples/nope", nullptr).status, 404);
  EXPECT_EQ(call(s, "GET", "/api/samples/..", nullptr).status, 404);
}

// ---------------------------------------------------------------------------
// generate

TEST(Generate, MemorizedMapReproducesPristine) {
  ASSERT_GE(fx().train_ssim, 0.6);
  service::Service s(fx().config());
  const auto r = call(s, "POST", "/api/generate", {{"checkpoint", "toy-p2p"}, {"map", b64_png(fx().pair.map.to_rgb())}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const auto img = png_from_b64(r.body["image"]);
  // Allow for 8-bit quantization of the PNG payload.
  EXPECT_GE(metrics::ssim(img, fx().pair.image), 0.6 - 0.01);
  EXPECT_EQ(call(s, "POST", "/api/generate", {{"checkpoint", "toy-p2p"}, {"map", b64_png(fx().pair.map.to_rgb())}}).body,
            r.body);
}

TEST(Generate, ErrorsMapToStatusCodes) {
  service::Service s(fx().config());
  const auto map = b64_png(fx().pair.map.to_rgb());
  auto r = call(s, "POST", "/api/generate", {{"checkpoint", "missing"}, {"map", map}});
  EXPECT_EQ(r.status, 404);
  r = call(s, "POST", "/api/generate", {{"checkpoint", "../checkpoints/toy-p2p"}, {"map", map}});
  EXPECT_EQ(r.status, 404);
  r = call(s, "POST", "/api/generate", {{"checkpoint", "toy-p2p"}, {"map", io::base64_encode(io::Bytes{1, 2, 3, 4})}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "decode_error");
  r = call(s, "POST", "/api/generate", {{"checkpoint", "toy-p2p"}, {"map", b64_png(oracle::random_image(64, 64, 3, 1))}});
  EXPECT_EQ(r.status, 400);
  r = call(s, "POST", "/api/generate", {{"checkpoint", "toy-p2p"}, {"map", b64_png(fx().pair.map.crop(0, 0, 30, 30).to_rgb())}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "shape_error");
  r = call(s, "POST", "/api/generate", {{"checkpoint", "det16"}, {"map", map}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "wrong_checkpoint_kind");
  r = call(s, "POST", "/api/generate", {{"map", map}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "missing_field");
  r = s.handle("POST", "/api/generate", "{not json");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "bad_json");
  EXPECT_EQ(s.handle("POST", "/api/generate", "[1]").status, 400);
  EXPECT_EQ(s.handle("GET", "/api/nothing", "").status, 404);
  EXPECT_EQ(s.handle("DELETE", "/api/samples", "").status, 404);
}

// ---------------------------------------------------------------------------
// forge

TEST(Forge, UntamperedMapIsBitExactNoOp) {
  service::Service s(fx().config());
  auto body = fx().forge_body();
  body["tampered"] = body["map"];
  const auto r = call(s, "POST", "/api/forge", body);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(io::base64_decode(r.body["blended"].get<std::string>()), io::encode_png(fx().pair.image));
  EXPECT_EQ(png_from_b64(r.body["mask"], 1), Image(64, 64, 1, 0.0f));
}

TEST(Forge, MissingFieldIs400) {
  service::Service s(fx().config());
  for (const char* key : {"checkpoint", "map", "tampered", "image"}) {
    auto body = fx().forge_body();
    body.erase(key);
    const auto r = call(s, "POST", "/api/forge", body);
    EXPECT_EQ(r.status, 400) << key;
    EXPECT_EQ(error_code(r), "missing_field") << key;
  }
  auto body = fx().forge_body();
  body["blend"] = {{"dilation", -1}};
  EXPECT_EQ(call(s, "POST", "/api/forge", body).status, 400);
}

TEST(Forge, IdempotentAndMatchesCli) {
  service::Service s(fx().config());
  const auto a = call(s, "POST", "/api/forge", fx().forge_body());
  ASSERT_EQ(a.status, 200) << a.body.dump();
  EXPECT_EQ(call(s, "POST", "/api/forge", fx().forge_body()).body, a.body);
  EXPECT_EQ(a.body["provenance"]["created_at"], "1970-01-01T00:00:00Z");

  oracle::TempDir work("svc_cli_forge");
  io::write_png(work / "map.png", fx().pair.map.to_rgb());
  io::write_png(work / "tampered.png", fx().tampered.to_rgb());
  io::write_png(work / (fx().pair.source_id + ".png"), fx().pair.image);
  std::ostringstream out, err;
  const int rc = cli::run({"--deterministic", "forge", "--ckpt", fx().translator.string(), "--map",
                           (work / "map.png").string(), "--tampered", (work / "tampered.png").string(), "--image",
                           (work / (fx().pair.source_id + ".png")).string(), "--out", (work / "out").string()},
                          out, err);
  ASSERT_EQ(rc, 0) << err.str();
  EXPECT_EQ(io::base64_decode(a.body["mask"].get<std::string>()), file_bytes(work / "out" / "mask.png"));
  EXPECT_EQ(io::base64_decode(a.body["blended"].get<std::string>()), file_bytes(work / "out" / "blended.png"));
  EXPECT_EQ(a.body["provenance"], json::parse(out.str()));

  const auto session = call(s, "GET", "/api/session", nullptr);
  EXPECT_EQ(session.body["translator"], "toy-p2p");
  EXPECT_EQ(session.body["last_forgery"], a.body["provenance"]);
}

// ---------------------------------------------------------------------------
// detect

TEST(Detect, MatchesHeatmapAndCliExactly) {
  service::Service s(fx().config());
  const auto img = io::decode_png(io::encode_png(oracle::random_image(40, 36, 3, 9)));
  const auto r = call(s, "POST", "/api/detect", {{"image", b64_png(img)}, {"stride", 3}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["patch"], 16);

  auto det = forensics::DetectorModel::load(fx().detector);
  const auto h = forensics::heatmap([&](std::span<const Image> p) { return det.probabilities(p); }, img, 16, 3);
  const auto scores = io::decode_npy(io::base64_decode(r.body["scores"].get<std::string>()));
  EXPECT_EQ(scores, h.to_image());
  EXPECT_EQ(io::base64_decode(r.body["heatmap"].get<std::string>()), io::encode_png(h.render()));

  oracle::TempDir work("svc_cli_detect");
  io::write_png(work / "img.png", img);
  std::ostringstream out, err;
  ASSERT_EQ(cli::run({"detect", "--ckpt", fx().detector.string(), "--image", (work / "img.png").string(), "--stride",
                      "3", "--out", (work / "hm.png").string()},
                     out, err),
            0)
      << err.str();
  EXPECT_EQ(io::base64_decode(r.body["scores"].get<std::string>()), file_bytes(work / "hm.npy"));
  EXPECT_EQ(call(s, "POST", "/api/detect", {{"image", b64_png(img)}, {"stride", 3}}).body, r.body);
}

TEST(Detect, ConstantDetectorGivesConstantHeatmap) {
  // A detector whose head is zero scores every patch sigmoid(bias) = 0.5.
  oracle::TempDir dir("svc_const");
  forensics::DetectorModel det({gan::Profile::toy, 16, forensics::TrainingMode::plain}, 4);
  {
    torch::NoGradGuard g;
    det.net()->head->weight.zero_();
    det.net()->head->bias.zero_();
  }
  det.save(dir / "const");
  auto c = fx().config();
  c.detector = dir / "const";
  service::Service s(c);
  const auto r = call(s, "POST", "/api/detect", {{"image", b64_png(oracle::random_image(32, 32, 3, 2))}, {"stride", 16}});
  ASSERT_EQ(r.status, 200);
  const auto scores = io::decode_npy(io::base64_decode(r.body["scores"].get<std::string>()));
  for (float v : scores.pixels()) EXPECT_EQ(v, 0.5f);
}

TEST(Detect, BadInputsAre400) {
  service::Service s(fx().config());
  const auto img = b64_png(oracle::random_image(32, 32, 3, 2));
  EXPECT_EQ(call(s, "POST", "/api/detect", {{"image", img}, {"stride", 33}}).status, 400);
  EXPECT_EQ(call(s, "POST", "/api/detect", {{"image", img}, {"stride", 0}}).status, 400);
  EXPECT_EQ(call(s, "POST", "/api/detect", {{"image", img}, {"stride", "4"}}).status, 400);
  EXPECT_EQ(call(s, "POST", "/api/detect", {{"image", img}}).status, 400);
  const auto r = call(s, "POST", "/api/detect", {{"image", b64_png(oracle::random_image(8, 40, 3, 2))}, {"stride", 1}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "shape_error");
  EXPECT_EQ(call(s, "POST", "/api/detect", {{"image", img}, {"stride", 4}, {"checkpoint", "toy-p2p"}}).status, 400);

  ServiceConfig none = fx().config();
  none.detector.clear();
  service::Service s2(none);
  EXPECT_EQ(call(s2, "POST", "/api/detect", {{"image", img}, {"stride", 4}}).status, 404);
}

// ---------------------------------------------------------------------------
// transport

TEST(Http, RoundTripCorsAndPreflight) {
  Running r(fx().config(), fx().data);
  auto cl = r.client();

  auto res = cl.Get("/api/schema", {{"Origin", "http://localhost:5173"}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(json::parse(res->body), service::Service::schema());

  res = cl.Get("/api/schema", {{"Origin", "http://example.com"}});
  ASSERT_TRUE(res);
  EXPECT_FALSE(res->has_header("Access-Control-Allow-Origin"));
  res = cl.Get("/api/schema", {{"Origin", "http://localhost.example.com"}});
  EXPECT_FALSE(res->has_header("Access-Control-Allow-Origin"));

  res = cl.Options("/api/forge", {{"Origin", "http://127.0.0.1:8000"}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://127.0.0.1:8000");
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);

  res = cl.Post("/api/forge", fx().forge_body().dump(), "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  service::Service direct(fx().config());
  EXPECT_EQ(json::parse(res->body), call(direct, "POST", "/api/forge", fx().forge_body()).body);

  res = cl.Post("/api/forge", "{", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body)["error"]["code"], "bad_json");

  res = cl.Get("/api/samples/..%2F..%2Fetc%2Fpasswd");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  res = cl.Get("/api/../api/schema");
  ASSERT_TRUE(res);
  EXPECT_NE(res->status, 500);
}

TEST(Http, OversizedBodyRejected) {
  auto c = fx().config();
  c.max_body_bytes = 1024;
  Running r(c);
  auto cl = r.client();
  const auto res = cl.Post("/api/generate", std::string(4096, 'x'), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
}

TEST(Http, EndpointsDoNotMutateRoots) {
  auto snapshot = [] {
    std::vector<std::pair<std::string, std::uintmax_t>> out;
    for (const auto& e : fs::recursive_directory_iterator(fx().dir.path())) {
      if (e.is_regular_file()) out.emplace_back(e.path().string(), e.file_size());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const auto before = snapshot();
  service::Service s(fx().config(), fx().data);
  call(s, "POST", "/api/forge", fx().forge_body());
  call(s, "POST", "/api/generate", {{"checkpoint", "toy-p2p"}, {"map", b64_png(fx().pair.map.to_rgb())}});
  call(s, "GET", "/api/samples/" + fx().pair.source_id, nullptr);
  EXPECT_EQ(snapshot(), before);
}

TEST(Schema, DescribesEveryEndpoint) {
  const auto s = service::Service::schema();
  for (const char* p : {"/api/generate", "/api/forge", "/api/detect", "/api/samples", "/api/samples/{id}",
                        "/api/checkpoints", "/api/session", "/api/schema"}) {
    EXPECT_TRUE(s["paths"].contains(p)) << p;
  }
}
