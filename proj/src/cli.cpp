#include "semaforge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>
#include <set>

#include "semaforge/config.hpp"
#include "semaforge/dataset.hpp"
#include "semaforge/embedder.hpp"
#include "semaforge/error.hpp"
#include "semaforge/forensics/heatmap.hpp"
#include "semaforge/forensics/robustness.hpp"
#include "semaforge/io.hpp"
#include "semaforge/log.hpp"
#include "semaforge/maps_client.hpp"
#include "semaforge/service.hpp"
#include "semaforge/synthetic.hpp"

namespace semaforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string log_level = "info";
};

struct Context {
  ProjectConfig project;
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::ostream& out;
};

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_text(path, j.dump(2) + "\n");
}

void emit(Context& ctx, const json& j) { ctx.out << j.dump(2) << "\n"; }

std::vector<fs::path> pngs_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFoundError("directory " + dir.string() + " not found");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string checkpoint_id(const fs::path& dir) { return fs::weakly_canonical(dir).filename().string(); }

LogLevel parse_level(const std::string& s) {
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  if (s == "warn") return LogLevel::warn;
  if (s == "error") return LogLevel::error;
  throw CLI::ValidationError("--log-level", "must be debug, info, warn or error");
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string out, source;
  std::optional<int> count, size;
  std::optional<double> val_fraction;
};

void prepare_data(Context& ctx, const PrepareArgs& a) {
  auto d = ctx.project.data;
  if (!a.source.empty()) d.source = a.source;
  if (a.count) d.count = *a.count;
  if (a.size) d.size = *a.size;
  if (a.val_fraction) d.val_fraction = *a.val_fraction;
  const fs::path root = a.out.empty() ? ctx.project.dataset_root : fs::path(a.out);
  if (root.empty()) throw ValidationError("no output root: pass --out or set dataset_root");

  std::vector<PairedSample> samples;
  std::vector<FetchFailure> failures;
  if (d.source == "synthetic") {
    samples = synth::make_pairs(d.count, d.size, ctx.seed);
  } else if (d.source == "stub-tiles" || d.source == "maps") {
    auto cities = d.cities;
    if (cities.empty()) cities.push_back({"stub-city", {40.7128, -74.0060}});
    FetchConfig fc;
    fc.perturbations = d.count;
    fc.radius_miles = d.radius_miles;
    fc.seed = ctx.seed;
    fc.zoom = d.zoom;
    std::unique_ptr<MapsClient> client;
    if (d.source == "maps") {
      client = std::make_unique<HttpMapsClient>(d.size);
    } else {
      client = std::make_unique<SyntheticMapsClient>(d.size, fc.palette, ctx.seed);
    }
    auto fetched = fetch_tiles(*client, cities, fc);
    samples = std::move(fetched.samples);
    failures = std::move(fetched.failures);
  } else {
    throw ValidationError("unknown data source '" + d.source + "'");
  }
  auto [kept, report] = curate(std::move(samples), d.curation);
  if (kept.empty()) throw EmptyDatasetError("no samples survived curation");
  const auto manifest = write_dataset(root, kept, d.val_fraction, ctx.seed, &report, &failures);
  std::size_t val = 0;
  for (const auto& e : manifest.samples) val += e.split == Split::val;
  emit(ctx, {{"root", root.string()},
             {"source", d.source},
             {"kept", report.kept},
             {"rejected", report.rejected.size()},
             {"failures", failures.size()},
             {"train", manifest.samples.size() - val},
             {"val", val}});
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string arch, data, out, profile, stages;
  std::optional<int> epochs, max_pairs, checkpoint_every;
  std::optional<double> target, lr;
};

void train(Context& ctx, const TrainArgs& a) {
  const auto arch = a.arch.empty() ? ctx.project.architecture : gan::architecture_from_string(a.arch);
  const auto profile = a.profile.empty() ? ctx.project.profile : gan::profile_from_string(a.profile);
  const fs::path root = a.data.empty() ? ctx.project.dataset_root : fs::path(a.data);
  if (root.empty()) throw ValidationError("no dataset: pass --data or set dataset_root");
  if (!fs::is_directory(root)) throw NotFoundError("dataset " + root.string() + " not found");

  auto data = load_dataset(root, Split::train);
  if (data.empty()) throw EmptyDatasetError("dataset " + root.string() + " has no training samples");
  if (a.max_pairs && *a.max_pairs > 0 && data.size() > static_cast<std::size_t>(*a.max_pairs)) {
    data.resize(*a.max_pairs);
  }
  const auto manifest = load_manifest(root);
  gan::TranslatorModel model(gan::ModelSpec::make(arch, profile, data.front().image.height(), manifest.palette),
                             ctx.seed);

  auto apply = [&](training::TrainConfig c) {
    c.seed = ctx.seed;
    if (a.epochs) c.epochs = *a.epochs;
    if (a.target) c.memorization_target = *a.target;
    if (a.lr) c.learning_rate = *a.lr;
    if (a.checkpoint_every) c.checkpoint_every = *a.checkpoint_every;
    if (c.checkpoint_every > 0 && c.checkpoint_dir.empty()) c.checkpoint_dir = fs::path(a.out) / "snapshots";
    return c;
  };
  std::vector<training::TrainConfig> stages;
  if (!a.stages.empty()) {
    std::stringstream ss(a.stages);
    for (std::string s; std::getline(ss, s, ',');) {
      auto c = apply(ctx.project.training);
      c.stage = training::stage_from_string(s);
      stages.push_back(c);
    }
  } else {
    for (const auto& s : ctx.project.stages) stages.push_back(apply(s));
  }
  if (!stages.empty() && arch != gan::Architecture::pix2pixhd) {
    throw ValidationError("staged training applies to pix2pixhd only");
  }

  log_info("training ", gan::to_string(arch), " (", gan::to_string(profile), ") on ", data.size(), " pairs");
  const auto report = stages.empty() ? training::finetune(model, data, apply(ctx.project.training))
                                     : training::train_staged(model, data, stages);
  model.save(a.out);
  const auto j = report.to_json(ctx.deterministic);
  write_json(fs::path(a.out) / "train_report.json", j);
  emit(ctx, {{"checkpoint", a.out},
             {"final_ssim", report.final_ssim},
             {"reached_target", report.reached_target},
             {"epochs", report.history.size()}});
}

// ---------------------------------------------------------------------------

struct ForgeArgs {
  std::string ckpt, map, tampered, image, out, method;
  std::optional<int> dilation, feather;
};

void forge(Context& ctx, const ForgeArgs& a) {
  auto model = gan::TranslatorModel::load(a.ckpt);
  const auto& palette = model.spec().palette;
  PairedSample sample;
  sample.map = io::read_map_png(a.map, palette);
  sample.image = io::read_png(a.image);
  sample.source_id = fs::path(a.image).stem().string();
  const auto tampered = io::read_map_png(a.tampered, palette);
  auto blend = ctx.project.blend;
  if (a.dilation) blend.dilation = *a.dilation;
  if (a.feather) blend.feather_radius = *a.feather;
  if (!a.method.empty()) blend.method = manip::blend_method_from_string(a.method);
  const auto record = manip::forge(model, sample, tampered, blend, checkpoint_id(a.ckpt), ctx.deterministic);
  fs::create_directories(a.out);
  record.write(a.out);
  emit(ctx, record.provenance());
}

// ---------------------------------------------------------------------------

struct DetectArgs {
  std::string ckpt, image, out;
  int stride = 0;
};

void detect(Context& ctx, const DetectArgs& a) {
  auto model = forensics::DetectorModel::load(a.ckpt);
  const auto image = io::read_png(a.image);
  const int patch = model.spec().patch_size;
  const int stride = a.stride > 0 ? a.stride : std::max(1, patch / 2);
  const auto h = forensics::heatmap([&](std::span<const Image> p) { return model.probabilities(p); }, image, patch,
                                    stride);
  const fs::path png(a.out);
  auto npy = png;
  npy.replace_extension(".npy");
  if (png.has_parent_path()) fs::create_directories(png.parent_path());
  io::write_png(png, h.render());
  io::write_file(npy, io::encode_npy(h.to_image()));
  double mean = 0.0, peak = 0.0;
  for (double s : h.scores) {
    mean += s;
    peak = std::max(peak, s);
  }
  mean /= static_cast<double>(h.scores.size());
  emit(ctx, {{"heatmap", png.string()},
             {"scores", npy.string()},
             {"height", h.height},
             {"width", h.width},
             {"patch", patch},
             {"stride", stride},
             {"mean_score", mean},
             {"max_score", peak}});
}

// ---------------------------------------------------------------------------

struct TrainDetectorArgs {
  std::string out, data, translator, mode;
  int synthetic_task = 0;
  int patch = 16;
  double val_fraction = 0.25;
  std::optional<int> epochs;
};

void train_detector(Context& ctx, const TrainDetectorArgs& a) {
  auto cfg = ctx.project.detector;
  cfg.seed = ctx.seed;
  if (!a.mode.empty()) cfg.mode = forensics::training_mode_from_string(a.mode);
  if (a.epochs) cfg.epochs = *a.epochs;
  cfg.validate();

  PatchDataset ds;
  if (a.synthetic_task > 0) {
    ds = synth::separable_patch_task(a.synthetic_task, a.patch, a.val_fraction, ctx.seed);
  } else {
    const fs::path root = a.data.empty() ? ctx.project.dataset_root : fs::path(a.data);
    if (root.empty() || a.translator.empty()) {
      throw ValidationError("train-detector needs --synthetic-task or both --data and --translator");
    }
    auto translator = gan::TranslatorModel::load(a.translator);
    std::vector<ImageTile> pristine, generated;
    for (const auto& s : load_dataset(root)) {
      pristine.push_back(s.image);
      generated.push_back(training::generate(translator, s.map));
    }
    ds = build_patch_dataset(std::move(pristine), std::move(generated), a.patch, a.val_fraction, ctx.seed);
  }
  auto trained = forensics::train_detector(ds, cfg);
  trained.model.save(a.out);
  const auto report = trained.report.to_json(ctx.deterministic);
  write_json(fs::path(a.out) / "detector_report.json", report);
  emit(ctx, report);
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string pristine, generated, masks, out;
  std::optional<int> n_examples, patch, stride;
  std::optional<double> min_clean;
};

void evaluate(Context& ctx, const EvaluateArgs& a) {
  auto protocol = ctx.project.metrics.protocol;
  if (a.n_examples) protocol.n_examples = *a.n_examples;
  if (a.patch) protocol.patch = *a.patch;
  if (a.stride) protocol.stride = *a.stride;
  if (a.min_clean) protocol.min_clean_fraction = *a.min_clean;
  if (protocol.n_examples < 1) throw ValidationError("--n-examples must be positive");

  std::vector<Image> pristine, generated;
  std::vector<BinaryMask> masks;
  for (const auto& p : pngs_in(a.pristine)) {
    if (static_cast<int>(pristine.size()) == protocol.n_examples) break;
    const auto g = fs::path(a.generated) / p.filename();
    if (!fs::exists(g)) throw NotFoundError("no generated counterpart for " + p.filename().string());
    pristine.push_back(io::read_png(p));
    generated.push_back(io::read_png(g));
    const auto m = a.masks.empty() ? fs::path() : fs::path(a.masks) / p.filename();
    masks.push_back(!m.empty() && fs::exists(m) ? BinaryMask::from_image(io::read_png(m, 1))
                                                 : BinaryMask(pristine.back().height(), pristine.back().width()));
  }
  if (pristine.empty()) throw EmptyDatasetError("no PNG images in " + a.pristine);
  auto embedder = metrics::make_embedder(ctx.project.metrics.embedder);
  const auto report = metrics::evaluate_dataset(pristine, generated, masks, protocol, *embedder);
  auto j = report.to_json();
  j["n_images"] = pristine.size();
  write_json(a.out, j);
  emit(ctx, j);
}

// ---------------------------------------------------------------------------

void bench_robustness(Context& ctx, const std::string& out_flag) {
  auto rc = ctx.project.robustness;
  if (!out_flag.empty()) rc.out = out_flag;
  auto detectors = rc.detectors;
  if (detectors.empty()) {
    for (auto mode : {forensics::TrainingMode::plain, forensics::TrainingMode::bart,
                      forensics::TrainingMode::adversarial}) {
      auto c = ctx.project.detector;
      c.mode = mode;
      detectors.push_back({forensics::to_string(mode), {}, c});
    }
  }

  std::optional<PatchDataset> task;
  auto synthetic_task = [&]() -> const PatchDataset& {
    if (!task) task = synth::separable_patch_task(rc.per_class, rc.patch, rc.val_fraction, ctx.seed);
    return *task;
  };

  forensics::EvalSet eval;
  if (rc.eval == "synthetic") {
    eval = forensics::eval_set_from_dataset(synthetic_task(), Split::val);
  } else {
    std::vector<manip::ForgeryRecord> records;
    for (const auto& dir : rc.forgeries) records.push_back(manip::ForgeryRecord::read(dir));
    std::vector<Image> pristine;
    for (const auto& p : rc.pristine) pristine.push_back(io::read_png(p));
    eval = forensics::eval_set_from_forgeries(records, pristine, rc.patch);
  }
  const auto grids = rc.grids.empty() ? forensics::default_sweep_grids() : rc.grids;

  std::vector<forensics::RobustnessCurve> curves;
  json summary = json::array();
  for (const auto& d : detectors) {
    std::optional<forensics::DetectorModel> model;
    if (!d.checkpoint.empty()) {
      model = forensics::DetectorModel::load(d.checkpoint);
    } else {
      auto c = *d.train;
      c.seed = ctx.seed;
      log_info("training ", d.label, " detector");
      model = forensics::train_detector(synthetic_task(), c).model;
    }
    if (model->spec().patch_size != rc.patch) {
      throw ValidationError("detector '" + d.label + "' uses patch " + std::to_string(model->spec().patch_size) +
                            ", benchmark uses " + std::to_string(rc.patch));
    }
    auto scorer = [&](std::span<const Image> p) { return model->probabilities(p); };
    auto c = forensics::robustness_sweep(scorer, eval, grids, d.label, ctx.seed);
    double mean = 0.0;
    for (const auto& curve : c) mean += curve.mean_auc();
    summary.push_back({{"label", d.label}, {"clean_auc", c.front().auc.front()}, {"mean_auc", mean / c.size()}});
    curves.insert(curves.end(), c.begin(), c.end());
  }

  fs::create_directories(rc.out);
  io::write_text(rc.out / "curves.csv", forensics::curves_to_csv(curves));
  write_json(rc.out / "curves.json", forensics::curves_to_json(curves));
  json plots = json::array();
  for (const auto& g : grids) {
    const auto name = std::string("plot_") + forensics::to_string(g.kind) + ".png";
    io::write_png(rc.out / name, forensics::plot_curves(curves, g.kind));
    plots.push_back(name);
  }
  emit(ctx, {{"out", rc.out.string()}, {"eval_patches", eval.patches.size()}, {"detectors", summary}, {"plots", plots}});
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string host, checkpoints, detector, ui, data;
  std::optional<int> port;
};

void serve(Context& ctx, const ServeArgs& a) {
  auto sc = ctx.project.service;
  if (!a.host.empty()) sc.host = a.host;
  if (a.port) sc.port = *a.port;
  if (!a.checkpoints.empty()) sc.checkpoints = a.checkpoints;
  if (!a.detector.empty()) sc.detector = a.detector;
  if (!a.ui.empty()) sc.ui = a.ui;
  service::Service svc(sc, a.data.empty() ? ctx.project.dataset_root : fs::path(a.data));
  const int port = svc.bind();
  log_info("serving on http://", sc.host, ":", port);
  ctx.out << json{{"host", sc.host}, {"port", port}}.dump() << std::endl;
  svc.serve();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic-map driven satellite image forgery and detection", "semaforge"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Project config (JSON)");
  app.add_option("--seed", g.seed, "Seed for every random choice; overrides the config");
  app.add_flag("--deterministic", g.deterministic, "Zero timestamps and wall-clock fields in outputs");
  app.add_option("--log-level", g.log_level, "debug, info, warn or error");

  PrepareArgs pa;
  auto* prepare = app.add_subcommand("prepare-data", "Build a curated paired dataset");
  prepare->add_option("--out", pa.out, "Dataset root to write");
  prepare->add_option("--source", pa.source, "synthetic, stub-tiles or maps");
  prepare->add_option("--count", pa.count, "Samples (synthetic) or perturbations per city (tiles)");
  prepare->add_option("--size", pa.size, "Tile size in pixels");
  prepare->add_option("--val-fraction", pa.val_fraction, "Fraction of samples held out");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a map-to-image translator");
  train_cmd->add_option("--arch", ta.arch, "cyclegan or pix2pixhd");
  train_cmd->add_option("--data", ta.data, "Dataset root");
  train_cmd->add_option("--out", ta.out, "Checkpoint directory")->required();
  train_cmd->add_option("--profile", ta.profile, "toy or full");
  train_cmd->add_option("--epochs", ta.epochs, "Epochs per stage");
  train_cmd->add_option("--target", ta.target, "Train-pair SSIM that ends training early");
  train_cmd->add_option("--lr", ta.lr, "Learning rate");
  train_cmd->add_option("--max-pairs", ta.max_pairs, "Use at most this many training pairs");
  train_cmd->add_option("--stages", ta.stages, "Comma-separated pix2pixhd stages, e.g. global-only,local-only,joint");
  train_cmd->add_option("--checkpoint-every", ta.checkpoint_every, "Snapshot every N epochs");

  ForgeArgs fa;
  auto* forge_cmd = app.add_subcommand("forge", "Synthesize and blend a tampered region");
  forge_cmd->add_option("--ckpt", fa.ckpt, "Translator checkpoint")->required();
  forge_cmd->add_option("--map", fa.map, "Original map PNG")->required();
  forge_cmd->add_option("--tampered", fa.tampered, "Tampered map PNG")->required();
  forge_cmd->add_option("--image", fa.image, "Pristine image PNG")->required();
  forge_cmd->add_option("--out", fa.out, "Output directory")->required();
  forge_cmd->add_option("--dilation", fa.dilation, "Mask dilation radius");
  forge_cmd->add_option("--feather", fa.feather, "Feather radius");
  forge_cmd->add_option("--method", fa.method, "alpha or poisson");

  DetectArgs da;
  auto* detect_cmd = app.add_subcommand("detect", "Score an image with a patch detector");
  detect_cmd->add_option("--ckpt", da.ckpt, "Detector checkpoint")->required();
  detect_cmd->add_option("--image", da.image, "Image PNG")->required();
  detect_cmd->add_option("--stride", da.stride, "Window stride (default half a patch)");
  detect_cmd->add_option("--out", da.out, "Heatmap PNG; scores go next to it as .npy")->required();

  TrainDetectorArgs tda;
  auto* train_det = app.add_subcommand("train-detector", "Train a patch detector");
  train_det->add_option("--out", tda.out, "Checkpoint directory")->required();
  train_det->add_option("--synthetic-task", tda.synthetic_task, "Patches per class of the synthetic task");
  train_det->add_option("--data", tda.data, "Dataset root (pristine side)");
  train_det->add_option("--translator", tda.translator, "Translator checkpoint (generated side)");
  train_det->add_option("--mode", tda.mode, "plain, bart or adversarial");
  train_det->add_option("--patch", tda.patch, "Patch size");
  train_det->add_option("--val-fraction", tda.val_fraction, "Validation fraction");
  train_det->add_option("--epochs", tda.epochs, "Epochs");

  EvaluateArgs ea;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "FID, KID and SSIM outside manipulated regions");
  evaluate_cmd->add_option("--pristine", ea.pristine, "Directory of pristine PNGs")->required();
  evaluate_cmd->add_option("--generated", ea.generated, "Directory of generated PNGs with matching names")->required();
  evaluate_cmd->add_option("--masks", ea.masks, "Directory of exclusion masks with matching names");
  evaluate_cmd->add_option("--out", ea.out, "Report JSON")->required();
  evaluate_cmd->add_option("--n-examples", ea.n_examples, "Images used from each directory (default 20)");
  evaluate_cmd->add_option("--patch", ea.patch, "Patch size");
  evaluate_cmd->add_option("--stride", ea.stride, "Patch stride");
  evaluate_cmd->add_option("--min-clean", ea.min_clean, "Minimum unmasked fraction per patch");

  std::string bench_out;
  auto* bench = app.add_subcommand("bench-robustness", "AUC of detectors under post-processing sweeps");
  bench->add_option("--out", bench_out, "Output directory (overrides robustness.out)");

  ServeArgs sa;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", sa.host, "Bind address");
  serve_cmd->add_option("--port", sa.port, "Port (0 picks a free one)");
  serve_cmd->add_option("--checkpoints", sa.checkpoints, "Checkpoint root");
  serve_cmd->add_option("--detector", sa.detector, "Detector checkpoint");
  serve_cmd->add_option("--ui", sa.ui, "Static UI directory");
  serve_cmd->add_option("--data", sa.data, "Dataset root");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    set_log_level(parse_level(g.log_level));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "semaforge: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    ProjectConfig project;
    if (!g.config.empty()) {
      project = ProjectConfig::load(g.config);
      if (!*prepare) project.validate_paths();
    }
    Context ctx{project, g.seed.value_or(project.seed), g.deterministic, out};
    if (*prepare) prepare_data(ctx, pa);
    else if (*train_cmd) train(ctx, ta);
    else if (*forge_cmd) forge(ctx, fa);
    else if (*detect_cmd) detect(ctx, da);
    else if (*train_det) train_detector(ctx, tda);
    else if (*evaluate_cmd) evaluate(ctx, ea);
    else if (*bench) bench_robustness(ctx, bench_out);
    else if (*serve_cmd) serve(ctx, sa);
    return 0;
  } catch (const Error& e) {
    err << "semaforge: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "semaforge: internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace semaforge::cli
