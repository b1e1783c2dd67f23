#include "semaforge/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "semaforge/error.hpp"
#include "semaforge/log.hpp"
#include "semaforge/metrics.hpp"

namespace semaforge::training {

using gan::Architecture;
using gan::TranslatorModel;
using nlohmann::json;

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::single: return "single";
    case Stage::global_only: return "global-only";
    case Stage::local_only: return "local-only";
    case Stage::joint: return "joint";
  }
  return "single";
}

Stage stage_from_string(const std::string& s) {
  if (s == "single") return Stage::single;
  if (s == "global-only") return Stage::global_only;
  if (s == "local-only") return Stage::local_only;
  if (s == "joint") return Stage::joint;
  throw InvalidArgument("unknown training stage '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be non-negative");
  if (!(memorization_target > 0.0 && memorization_target <= 1.0)) {
    throw ValidationError("memorization_target must lie in (0, 1]");
  }
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every must be non-negative");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) throw ValidationError("checkpoint_every needs checkpoint_dir");
  if (decay_from && (*decay_from < 1)) throw ValidationError("decay_from must be a positive epoch");
}

json TrainConfig::to_json() const {
  json j = {{"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"beta1", beta1},
            {"beta2", beta2},
            {"seed", seed},
            {"stage", to_string(stage)},
            {"memorization_target", memorization_target},
            {"checkpoint_every", checkpoint_every}};
  if (decay_from) j["decay_from"] = *decay_from;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  static const std::vector<std::string> known = {"epochs", "batch_size", "learning_rate", "beta1",
                                                 "beta2", "seed", "stage", "memorization_target",
                                                 "checkpoint_every", "decay_from", "checkpoint_dir"};
  if (!j.is_object()) throw ValidationError("training config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("unknown training key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.seed = j.value("seed", c.seed);
    c.stage = stage_from_string(j.value("stage", std::string("single")));
    c.memorization_target = j.value("memorization_target", c.memorization_target);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    if (j.contains("checkpoint_dir")) c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
    if (j.contains("decay_from")) c.decay_from = j.at("decay_from").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

json TrainReport::to_json(bool deterministic) const {
  json h = json::array();
  for (const auto& e : history) {
    h.push_back({{"epoch", e.epoch}, {"stage", to_string(e.stage)}, {"terms", e.terms}, {"ssim", e.ssim}});
  }
  json st = json::array();
  for (const auto& s : stages) {
    st.push_back({{"stage", to_string(s.stage)}, {"first_epoch", s.first_epoch}, {"epochs_run", s.epochs_run}});
  }
  return {{"history", h},
          {"stages", st},
          {"final_terms", final_terms},
          {"initial_ssim", initial_ssim},
          {"final_ssim", final_ssim},
          {"reached_target", reached_target},
          {"wall_seconds", deterministic ? 0.0 : wall_seconds},
          {"checkpoints", checkpoints}};
}

namespace {

void check_palette(const TranslatorModel& model, const SemanticMap& map) {
  const auto& trained = model.spec().palette;
  std::vector<bool> seen(map.palette().size(), false);
  for (auto c : map.classes()) {
    if (c < seen.size()) seen[c] = true;
  }
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (seen[c] && trained.find(map.palette()[c].color) < 0) {
      log_warn("map class '", map.palette()[c].name, "' is not in the model's training palette");
    }
  }
}

void check_size(const TranslatorModel& model, const SemanticMap& map) {
  const int factor = model.architecture() == Architecture::cyclegan
                         ? 1 << model.spec().generator.downsample_levels
                         : 2 << model.spec().global_generator.downsample_levels;
  if (map.height() % factor != 0 || map.width() % factor != 0) {
    throw ShapeError("map of " + std::to_string(map.height()) + "x" + std::to_string(map.width()) +
                     " is not divisible by the generator's downsampling factor " + std::to_string(factor));
  }
}

void check_compatible(const TranslatorModel& model, const std::vector<PairedSample>& data) {
  if (data.empty()) throw EmptyDatasetError("no training pairs");
  for (const auto& s : data) {
    validate_sample(s);
    check_size(model, s.map);
    if (s.map.height() != data.front().map.height() || s.map.width() != data.front().map.width()) {
      throw ShapeError("training pairs must share one size");
    }
  }
}

bool all_finite(const std::map<std::string, double>& terms) {
  return std::all_of(terms.begin(), terms.end(), [](const auto& kv) { return std::isfinite(kv.second); });
}

/// Everything one stage needs: which generator parameters move and how a
/// batch turns into loss terms.
class StageRunner {
 public:
  StageRunner(TranslatorModel& model, Stage stage) : model_(model), stage_(stage) {
    const bool cyclegan = model.architecture() == Architecture::cyclegan;
    if (cyclegan && stage != Stage::single) throw ValidationError("CycleGAN trains in the single stage only");
    if (!cyclegan && stage == Stage::single) stage_ = Stage::joint;
    auto& hd = model.hd_generator();
    switch (stage_) {
      case Stage::global_only: gen_params_ = hd->global->parameters(); break;
      case Stage::local_only:
        gen_params_ = hd->local->parameters();
        gan::set_requires_grad(*hd->global, false);
        frozen_global_ = true;
        break;
      default: gen_params_ = model.generator_parameters(); break;
    }
  }

  ~StageRunner() {
    if (frozen_global_) gan::set_requires_grad(*model_.hd_generator()->global, true);
  }

  StageRunner(const StageRunner&) = delete;
  StageRunner& operator=(const StageRunner&) = delete;

  std::vector<torch::Tensor>& generator_parameters() { return gen_params_; }

  /// Runs the objective; with optimizers, performs the generator update
  /// followed by the discriminator update.
  std::map<std::string, double> step(const torch::Tensor& map, const torch::Tensor& image,
                                     torch::optim::Optimizer* opt_g, torch::optim::Optimizer* opt_d) {
    const auto& spec = model_.spec();
    if (model_.architecture() == Architecture::cyclegan) {
      const auto nets = model_.cyclegan_networks();
      auto o = gan::cyclegan_objective(nets, spec.loss_weights, map, image, spec.adversarial_mode);
      const auto values = o.values();
      if (opt_g && all_finite(values)) {
        opt_g->zero_grad();
        o.generator_total.backward();
        opt_g->step();
        opt_d->zero_grad();
        const auto d_loss =
            gan::discriminator_loss(nets.D_y(image), nets.D_y(o.fake_y.detach()), spec.adversarial_mode) +
            gan::discriminator_loss(nets.D_x(map), nets.D_x(o.fake_x.detach()), spec.adversarial_mode);
        d_loss.backward();
        opt_d->step();
      }
      return values;
    }
    torch::Tensor m = map, y = image, fake;
    auto& hd = model_.hd_generator();
    if (stage_ == Stage::global_only) {
      m = gan::downsample_area(map, 2);
      y = gan::downsample_area(image, 2);
      fake = hd->forward_global(m);
    } else {
      fake = hd->forward(m);
    }
    auto o = gan::pix2pixhd_terms(model_.tapped_discriminators(), spec.loss_weights, m, y, fake,
                                  spec.adversarial_mode);
    const auto values = o.values();
    if (opt_g && all_finite(values)) {
      opt_g->zero_grad();
      o.total.backward();
      opt_g->step();
      opt_d->zero_grad();
      o.discriminator.backward();
      opt_d->step();
    }
    return values;
  }

  /// Train-pair SSIM of the output this stage optimizes.
  double ssim(const std::vector<PairedSample>& data) {
    if (stage_ != Stage::global_only) return train_pair_ssim(model_, data);
    torch::NoGradGuard guard;
    double sum = 0.0;
    for (const auto& s : data) {
      const auto out = model_.hd_generator()->forward_global_upsampled(gan::map_to_tensor(s.map));
      sum += metrics::ssim(gan::tensor_to_image(out), s.image);
    }
    return sum / static_cast<double>(data.size());
  }

 private:
  TranslatorModel& model_;
  Stage stage_;
  std::vector<torch::Tensor> gen_params_;
  bool frozen_global_ = false;
};

struct Batch {
  torch::Tensor map;
  torch::Tensor image;
};

std::vector<Batch> make_batches(const std::vector<PairedSample>& data, const std::vector<std::size_t>& order,
                                int batch_size) {
  std::vector<Batch> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    std::vector<const SemanticMap*> maps;
    std::vector<const Image*> images;
    for (std::size_t j = i; j < std::min(order.size(), i + batch_size); ++j) {
      maps.push_back(&data[order[j]].map);
      images.push_back(&data[order[j]].image);
    }
    out.push_back({gan::stack_maps(maps), gan::stack_images(images)});
  }
  return out;
}

void accumulate(std::map<std::string, double>& sum, const std::map<std::string, double>& terms) {
  for (const auto& [k, v] : terms) sum[k] += v;
}

void divide(std::map<std::string, double>& sum, double n) {
  for (auto& [k, v] : sum) v /= n;
}

void run_stage(TranslatorModel& model, const std::vector<PairedSample>& data, const TrainConfig& cfg,
               TrainReport& report) {
  cfg.validate();
  StageRunner runner(model, cfg.stage);
  StageBoundary boundary{cfg.stage, report.history.size(), 0};

  auto adam = [&](std::vector<torch::Tensor> params) {
    return torch::optim::Adam(std::move(params), torch::optim::AdamOptions(cfg.learning_rate)
                                                     .betas(std::make_tuple(cfg.beta1, cfg.beta2)));
  };
  auto opt_g = adam(runner.generator_parameters());
  auto opt_d = adam(model.discriminator_parameters());

  torch::manual_seed(cfg.seed);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());

  model.train(true);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.decay_from && epoch >= *cfg.decay_from) {
      const double span = cfg.epochs - *cfg.decay_from + 1;
      const double lr = cfg.learning_rate * (1.0 - (epoch - *cfg.decay_from) / span);
      for (auto* opt : {&opt_g, &opt_d}) {
        for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
      }
    }
    const auto snapshot = model.snapshot();
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i))]);
    }
    std::map<std::string, double> sum;
    const auto batches = make_batches(data, order, cfg.batch_size);
    for (const auto& b : batches) {
      const auto terms = runner.step(b.map, b.image, &opt_g, &opt_d);
      if (!all_finite(terms)) {
        model.restore(snapshot);
        model.train(false);
        throw DomainError("training diverged in epoch " + std::to_string(epoch) + "; parameters rolled back");
      }
      accumulate(sum, terms);
    }
    divide(sum, static_cast<double>(batches.size()));

    EpochRecord rec{epoch, cfg.stage, std::move(sum), runner.ssim(data)};
    log(LogLevel::debug, to_string(cfg.stage), " epoch ", epoch, " ssim ", rec.ssim);
    report.history.push_back(std::move(rec));
    ++boundary.epochs_run;

    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "%s_epoch_%04d", to_string(cfg.stage), epoch);
      const auto path = cfg.checkpoint_dir / name;
      model.save(path);
      report.checkpoints.push_back(path.string());
    }
    if (report.history.back().ssim >= cfg.memorization_target) {
      report.reached_target = true;
      break;
    }
  }
  model.train(false);

  // Final objective values with the trained weights, for cross-checks.
  torch::NoGradGuard guard;
  std::iota(order.begin(), order.end(), 0);
  std::map<std::string, double> final_terms;
  const auto batches = make_batches(data, order, cfg.batch_size);
  for (const auto& b : batches) accumulate(final_terms, runner.step(b.map, b.image, nullptr, nullptr));
  divide(final_terms, static_cast<double>(batches.size()));
  report.final_terms = std::move(final_terms);
  report.final_ssim = runner.ssim(data);
  report.stages.push_back(boundary);
}

}  // namespace

TrainReport finetune(TranslatorModel& model, const std::vector<PairedSample>& data, const TrainConfig& cfg) {
  return train_staged(model, data, {cfg});
}

void validate_stage_order(const std::vector<TrainConfig>& stages) {
  if (stages.empty()) throw ValidationError("no training stages");
  if (stages.size() == 1 && stages.front().stage == Stage::single) return;
  int previous = 0;
  for (const auto& s : stages) {
    if (s.stage == Stage::single) throw ValidationError("'single' cannot be part of a staged schedule");
    const int rank = static_cast<int>(s.stage);
    if (rank <= previous) {
      throw ValidationError("stages must run global-only, then local-only, then joint");
    }
    previous = rank;
  }
}

TrainReport train_staged(TranslatorModel& model, const std::vector<PairedSample>& data,
                         const std::vector<TrainConfig>& stages) {
  validate_stage_order(stages);
  for (const auto& s : stages) s.validate();
  check_compatible(model, data);
  if (model.architecture() == Architecture::cyclegan && stages.front().stage != Stage::single) {
    throw ValidationError("staged schedules apply to pix2pixHD only");
  }
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  model.train(false);
  report.initial_ssim = train_pair_ssim(model, data);
  for (const auto& s : stages) run_stage(model, data, s, report);
  report.reached_target = report.final_ssim >= stages.back().memorization_target;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ImageTile generate(TranslatorModel& model, const SemanticMap& map) {
  check_size(model, map);
  check_palette(model, map);
  torch::NoGradGuard guard;
  model.train(false);
  return gan::tensor_to_image(model.translate(gan::map_to_tensor(map)));
}

Image generate_map(TranslatorModel& model, const ImageTile& image) {
  torch::NoGradGuard guard;
  model.train(false);
  return gan::tensor_to_image(model.translate_back(gan::image_to_tensor(image)));
}

double train_pair_ssim(TranslatorModel& model, const std::vector<PairedSample>& data) {
  if (data.empty()) throw EmptyDatasetError("no pairs");
  double sum = 0.0;
  for (const auto& s : data) sum += metrics::ssim(generate(model, s.map), s.image);
  return sum / static_cast<double>(data.size());
}

}  // namespace semaforge::training
