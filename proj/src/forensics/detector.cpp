#include "semaforge/forensics/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "semaforge/error.hpp"
#include "semaforge/forensics/auc.hpp"
#include "semaforge/io.hpp"
#include "semaforge/log.hpp"

namespace semaforge::forensics {

namespace nn = torch::nn;
using nlohmann::json;

const char* to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::plain: return "plain";
    case TrainingMode::bart: return "bart";
    case TrainingMode::adversarial: return "adversarial";
  }
  return "plain";
}

TrainingMode training_mode_from_string(const std::string& s) {
  if (s == "plain") return TrainingMode::plain;
  if (s == "bart") return TrainingMode::bart;
  if (s == "adversarial") return TrainingMode::adversarial;
  throw InvalidArgument("unknown training mode '" + s + "'");
}

json DetectorSpec::to_json() const {
  return {{"kind", "detector"},
          {"profile", gan::to_string(profile)},
          {"patch_size", patch_size},
          {"training_mode", to_string(mode)}};
}

DetectorSpec DetectorSpec::from_json(const json& j) {
  try {
    if (j.value("kind", std::string()) != "detector") throw ValidationError("not a detector checkpoint");
    DetectorSpec s;
    s.profile = gan::profile_from_string(j.at("profile"));
    s.patch_size = j.at("patch_size");
    s.mode = training_mode_from_string(j.at("training_mode"));
    if (s.patch_size < 8) throw ValidationError("patch_size too small");
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid detector spec: ") + e.what());
  }
}

namespace {

nn::Conv2d conv(int in, int out, int k, int stride) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(false));
}

struct BasicBlockImpl : nn::Module {
  BasicBlockImpl(int in, int out, int stride) {
    body = register_module("body", nn::Sequential(conv(in, out, 3, stride), nn::BatchNorm2d(out), nn::ReLU(),
                                                  conv(out, out, 3, 1), nn::BatchNorm2d(out)));
    if (stride != 1 || in != out) {
      shortcut = register_module("shortcut", nn::Sequential(conv(in, out, 1, stride), nn::BatchNorm2d(out)));
    }
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return torch::relu(body->forward(x) + (shortcut ? shortcut->forward(x) : x));
  }
  nn::Sequential body{nullptr}, shortcut{nullptr};
};
TORCH_MODULE(BasicBlock);

struct BottleneckImpl : nn::Module {
  static constexpr int kExpansion = 4;
  BottleneckImpl(int in, int planes, int stride) {
    const int out = planes * kExpansion;
    body = register_module(
        "body", nn::Sequential(conv(in, planes, 1, 1), nn::BatchNorm2d(planes), nn::ReLU(),
                               conv(planes, planes, 3, stride), nn::BatchNorm2d(planes), nn::ReLU(),
                               conv(planes, out, 1, 1), nn::BatchNorm2d(out)));
    if (stride != 1 || in != out) {
      shortcut = register_module("shortcut", nn::Sequential(conv(in, out, 1, stride), nn::BatchNorm2d(out)));
    }
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return torch::relu(body->forward(x) + (shortcut ? shortcut->forward(x) : x));
  }
  nn::Sequential body{nullptr}, shortcut{nullptr};
};
TORCH_MODULE(Bottleneck);

}  // namespace

DetectorNetImpl::DetectorNetImpl(gan::Profile profile) {
  nn::Sequential s;
  int features = 0;
  if (profile == gan::Profile::toy) {
    s->push_back(conv(3, 16, 3, 1));
    s->push_back(nn::BatchNorm2d(16));
    s->push_back(nn::ReLU());
    s->push_back(BasicBlock(16, 16, 1));
    s->push_back(BasicBlock(16, 32, 2));
    s->push_back(BasicBlock(32, 64, 2));
    features = 64;
  } else {
    s->push_back(conv(3, 64, 3, 1));
    s->push_back(nn::BatchNorm2d(64));
    s->push_back(nn::ReLU());
    const int blocks[] = {3, 4, 6, 3};
    const int planes[] = {64, 128, 256, 512};
    int in = 64;
    for (int stage = 0; stage < 4; ++stage) {
      for (int b = 0; b < blocks[stage]; ++b) {
        s->push_back(Bottleneck(in, planes[stage], b == 0 && stage > 0 ? 2 : 1));
        in = planes[stage] * BottleneckImpl::kExpansion;
      }
    }
    features = in;
  }
  s->push_back(nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)));
  s->push_back(nn::Flatten());
  body = register_module("body", s);
  head = register_module("head", nn::Linear(features, 1));
  // Zero head: an untrained detector scores every patch 0.5.
  torch::NoGradGuard guard;
  head->weight.zero_();
  head->bias.zero_();
}

torch::Tensor DetectorNetImpl::forward(const torch::Tensor& x) {
  return head->forward(body->forward(x * 2.0 - 1.0)).squeeze(1);
}

DetectorModel::DetectorModel(DetectorSpec spec, std::uint64_t seed) : spec_(spec) {
  torch::manual_seed(seed);
  net_ = DetectorNet(spec_.profile);
  net_->eval();
}

torch::Tensor patches_to_tensor(std::span<const Image> patches) {
  if (patches.empty()) throw EmptyDatasetError("no patches");
  const auto& first = patches.front();
  auto t = torch::empty({static_cast<std::int64_t>(patches.size()), first.height(), first.width(), first.channels()},
                        torch::kFloat32);
  float* dst = t.data_ptr<float>();
  for (const auto& p : patches) {
    if (!p.same_shape(first)) throw ShapeError("patches differ in shape");
    dst = std::copy(p.pixels().begin(), p.pixels().end(), dst);
  }
  return t.permute({0, 3, 1, 2}).contiguous();
}

torch::Tensor DetectorModel::logits(const torch::Tensor& x) { return net_->forward(x); }

std::vector<double> DetectorModel::probabilities(std::span<const Image> patches, int batch_size) {
  for (const auto& p : patches) {
    if (p.height() != spec_.patch_size || p.width() != spec_.patch_size || p.channels() != 3) {
      throw ShapeError("detector expects " + std::to_string(spec_.patch_size) + " px RGB patches");
    }
  }
  torch::NoGradGuard guard;
  net_->eval();
  std::vector<double> out;
  out.reserve(patches.size());
  for (std::size_t i = 0; i < patches.size(); i += batch_size) {
    const auto n = std::min<std::size_t>(batch_size, patches.size() - i);
    const auto p = torch::sigmoid(net_->forward(patches_to_tensor(patches.subspan(i, n)))).to(torch::kDouble);
    const double* v = p.data_ptr<double>();
    out.insert(out.end(), v, v + n);
  }
  return out;
}

void DetectorModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_text(dir / "spec.json", spec_.to_json().dump(2) + "\n");
  torch::serialize::OutputArchive archive;
  net_->save(archive);
  archive.save_to((dir / "detector.pt").string());
}

DetectorModel DetectorModel::load(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "spec.json")) throw NotFoundError("no detector checkpoint at " + dir.string());
  json j;
  try {
    j = json::parse(io::read_text(dir / "spec.json"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid spec.json: ") + e.what());
  }
  DetectorModel m(DetectorSpec::from_json(j));
  const auto blob = dir / "detector.pt";
  if (!std::filesystem::exists(blob)) throw NotFoundError("missing parameter blob " + blob.string());
  torch::serialize::InputArchive archive;
  archive.load_from(blob.string());
  m.net_->load(archive);
  m.net_->eval();
  return m;
}

torch::Tensor project_linf(const torch::Tensor& x_adv, const torch::Tensor& x, double epsilon) {
  torch::NoGradGuard guard;
  // Box bounds in double, rounded inward to the nearest float so |out - x| <= epsilon holds exactly.
  const auto xd = x.to(torch::kDouble);
  const auto lo_d = (xd - epsilon).clamp_min(0.0);
  const auto hi_d = (xd + epsilon).clamp_max(1.0);
  auto lo = lo_d.to(x.scalar_type());
  auto hi = hi_d.to(x.scalar_type());
  lo = torch::where(lo.to(torch::kDouble) < lo_d, torch::nextafter(lo, x), lo);
  hi = torch::where(hi.to(torch::kDouble) > hi_d, torch::nextafter(hi, x), hi);
  return torch::min(torch::max(x_adv.to(x.scalar_type()), lo), hi);
}

torch::Tensor pgd_attack(DetectorNet& net, const torch::Tensor& x, const torch::Tensor& labels,
                         const PgdConfig& cfg) {
  if (cfg.epsilon < 0.0) throw InvalidArgument("epsilon must be non-negative");
  if (cfg.steps < 0) throw InvalidArgument("attack steps must be non-negative");
  if (cfg.steps == 0 || cfg.epsilon == 0.0) return x.detach().clone();
  const double step = cfg.step_size > 0.0 ? cfg.step_size : cfg.epsilon / 3.0;
  auto x0 = x.detach();
  auto xa = x0.clone();
  if (cfg.random_start) xa = project_linf(x0 + (torch::rand_like(x0) * 2.0 - 1.0) * cfg.epsilon, x0, cfg.epsilon);
  for (int s = 0; s < cfg.steps; ++s) {
    xa.requires_grad_(true);
    const auto loss = torch::binary_cross_entropy_with_logits(net->forward(xa), labels);
    const auto grad = torch::autograd::grad({loss}, {xa})[0];
    xa = project_linf(xa.detach() + step * grad.sign(), x0, cfg.epsilon);
  }
  return xa.detach();
}

void DetectorConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be non-negative");
  if (epsilon_levels < 0.0) throw ValidationError("epsilon must be non-negative");
  if (pgd_steps < 0) throw ValidationError("pgd_steps must be non-negative");
  for (const auto& s : bart) s.validate();
}

json DetectorConfig::to_json() const {
  json specs = json::array();
  for (const auto& s : bart) specs.push_back({{"kind", to_string(s.kind)}, {"min", s.min}, {"max", s.max}});
  return {{"profile", gan::to_string(profile)},
          {"mode", to_string(mode)},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"seed", seed},
          {"epsilon", epsilon_levels},
          {"pgd_steps", pgd_steps},
          {"bart", specs}};
}

DetectorConfig DetectorConfig::from_json(const json& j) {
  static const std::vector<std::string> known = {"profile", "mode",      "epochs",    "batch_size", "learning_rate",
                                                 "seed",    "epsilon",   "pgd_steps", "bart"};
  if (!j.is_object()) throw ValidationError("detector config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("unknown detector key '" + key + "'");
    }
  }
  DetectorConfig c;
  try {
    c.profile = gan::profile_from_string(j.value("profile", std::string("toy")));
    c.mode = training_mode_from_string(j.value("mode", std::string("plain")));
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.epsilon_levels = j.value("epsilon", c.epsilon_levels);
    c.pgd_steps = j.value("pgd_steps", c.pgd_steps);
    if (j.contains("bart")) {
      c.bart.clear();
      for (const auto& s : j.at("bart")) {
        c.bart.push_back({transform_kind_from_string(s.at("kind")), s.at("min"), s.at("max")});
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid detector config: ") + e.what());
  }
  c.validate();
  return c;
}

json DetectorReport::to_json(bool deterministic) const {
  json h = json::array();
  for (const auto& e : history) h.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_auc", e.val_auc}});
  return {{"history", h},
          {"val_auc", val_auc},
          {"max_accuracy", max_accuracy},
          {"accuracy", accuracy},
          {"max_perturbation", max_perturbation},
          {"wall_seconds", deterministic ? 0.0 : wall_seconds}};
}

Evaluation evaluate_detector(DetectorModel& model, std::span<const Image> patches, std::span<const int> labels) {
  const auto scores = model.probabilities(patches);
  return {roc_auc(scores, labels), max_accuracy(scores, labels), accuracy_at(scores, labels, 0.5)};
}

TrainedDetector train_detector(const PatchDataset& data, const DetectorConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  for (auto split : {Split::train, Split::val}) {
    if (data.count(split, PatchLabel::pristine) == 0 || data.count(split, PatchLabel::generated) == 0) {
      throw InsufficientSamplesError(std::string(to_string(split)) + " split needs both labels");
    }
  }
  DetectorModel model({cfg.profile, data.patch_size(), cfg.mode}, cfg.seed);
  auto& net = model.net();
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.learning_rate));

  const auto train_idx = data.indices(Split::train);
  const auto val_idx = data.indices(Split::val);
  std::vector<Image> val_patches;
  std::vector<int> val_labels;
  for (auto i : val_idx) {
    val_patches.push_back(data.patch(i));
    val_labels.push_back(data.label(i) == PatchLabel::generated);
  }

  const PgdConfig pgd{cfg.epsilon_levels / 255.0, cfg.pgd_steps, 0.0, true};
  const bool attack = cfg.mode == TrainingMode::adversarial && pgd.epsilon > 0.0 && pgd.steps > 0;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_idx.size());
  TrainedDetector out{model, {}};
  auto& report = out.report;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i))]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      std::vector<Image> patches;
      std::vector<float> labels;
      for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) {
        const auto idx = train_idx[order[k]];
        auto p = data.patch(idx);
        if (cfg.mode == TrainingMode::bart) p = bart_augment(p, cfg.bart, rng);
        patches.push_back(std::move(p));
        labels.push_back(data.label(idx) == PatchLabel::generated ? 1.0f : 0.0f);
      }
      auto x = patches_to_tensor(patches);
      const auto y = torch::tensor(labels);
      if (attack) {
        net->eval();
        const auto xa = pgd_attack(net, x, y, pgd);
        report.max_perturbation =
            std::max(report.max_perturbation, (xa.to(torch::kDouble) - x.to(torch::kDouble)).abs().max().item<double>());
        x = xa;
      }
      net->train();
      opt.zero_grad();
      const auto loss = torch::binary_cross_entropy_with_logits(net->forward(x), y);
      loss.backward();
      opt.step();
      loss_sum += loss.item<double>();
      ++batches;
    }
    const double val_auc = roc_auc(model.probabilities(val_patches), val_labels);
    report.history.push_back({epoch, loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1)), val_auc});
    log(LogLevel::debug, "detector epoch ", epoch, " val auc ", val_auc);
  }
  const auto eval = evaluate_detector(model, val_patches, val_labels);
  report.val_auc = eval.auc;
  report.max_accuracy = eval.max_accuracy;
  report.accuracy = eval.accuracy;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace semaforge::forensics
