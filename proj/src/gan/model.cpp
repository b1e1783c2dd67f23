#include "semaforge/gan/model.hpp"

#include <algorithm>

#include "semaforge/dataset.hpp"
#include "semaforge/error.hpp"
#include "semaforge/io.hpp"

namespace semaforge::gan {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Architecture a) { return a == Architecture::cyclegan ? "cyclegan" : "pix2pixhd"; }

Architecture architecture_from_string(const std::string& s) {
  if (s == "cyclegan") return Architecture::cyclegan;
  if (s == "pix2pixhd") return Architecture::pix2pixhd;
  throw InvalidArgument("unknown architecture '" + s + "'");
}

const char* to_string(Profile p) { return p == Profile::toy ? "toy" : "full"; }

Profile profile_from_string(const std::string& s) {
  if (s == "toy") return Profile::toy;
  if (s == "full") return Profile::full;
  throw InvalidArgument("unknown profile '" + s + "'");
}

ModelSpec ModelSpec::make(Architecture arch, Profile profile, int tile_size, Palette palette) {
  ModelSpec s;
  s.architecture = arch;
  s.profile = profile;
  s.palette = std::move(palette);
  const bool toy = profile == Profile::toy;
  s.tile_size = tile_size > 0 ? tile_size : (toy ? 64 : 512);
  if (arch == Architecture::cyclegan) {
    s.generator = {GeneratorKind::cyclegan_resnet, 3, 3, toy ? 16 : 64, toy ? 2 : 9, 2};
    s.discriminator = {3, 1, false, 3, toy ? 16 : 64};
  } else {
    auto [global, local] = pix2pixhd_specs(3, 3, toy ? 8 : 32, toy ? 2 : 9, toy ? 1 : 3);
    s.generator = local;
    s.global_generator = global;
    s.discriminator = {3, 3, true, 6, toy ? 16 : 64};
  }
  return s;
}

void ModelSpec::validate() const {
  gan::validate(generator);
  gan::validate(discriminator);
  gan::validate(loss_weights);
  if (palette.size() == 0) throw ValidationError("model palette is empty");
  if (architecture == Architecture::cyclegan) {
    if (generator.kind != GeneratorKind::cyclegan_resnet) throw ValidationError("CycleGAN needs resnet generators");
    if (generator.in_channels != generator.out_channels) {
      throw ValidationError("CycleGAN generators must preserve channel count");
    }
    const int factor = 1 << generator.downsample_levels;
    if (tile_size % factor != 0) throw ValidationError("tile size not divisible by generator downsampling");
  } else {
    gan::validate(global_generator);
    if (generator.kind != GeneratorKind::pix2pixhd_local_enhancer ||
        global_generator.kind != GeneratorKind::pix2pixhd_global) {
      throw ValidationError("pix2pixHD needs a global generator and a local enhancer");
    }
    if (!discriminator.conditional) throw ValidationError("pix2pixHD discriminators are conditional");
    const int factor = 2 << global_generator.downsample_levels;
    if (tile_size % factor != 0) throw ValidationError("tile size not divisible by generator downsampling");
  }
  if (tile_size < (1 << discriminator.n_layers) << (discriminator.scales - 1)) {
    throw ValidationError("tile size too small for the discriminator stack");
  }
}

namespace {

json generator_json(const GeneratorSpec& g) {
  return {{"kind", to_string(g.kind)},           {"in_channels", g.in_channels},
          {"out_channels", g.out_channels},      {"base_width", g.base_width},
          {"n_resnet_blocks", g.n_resnet_blocks}, {"downsample_levels", g.downsample_levels}};
}

GeneratorSpec generator_from_json(const json& j) {
  return {generator_kind_from_string(j.at("kind")), j.at("in_channels"),    j.at("out_channels"),
          j.at("base_width"),                       j.at("n_resnet_blocks"), j.at("downsample_levels")};
}

}  // namespace

json ModelSpec::to_json() const {
  json j = {{"kind", "translator"},
            {"architecture", to_string(architecture)},
            {"profile", to_string(profile)},
            {"tile_size", tile_size},
            {"generator", generator_json(generator)},
            {"discriminator",
             {{"kind", "patchgan"},
              {"n_layers", discriminator.n_layers},
              {"scales", discriminator.scales},
              {"conditional", discriminator.conditional},
              {"in_channels", discriminator.in_channels},
              {"base_width", discriminator.base_width}}},
            {"loss_weights",
             {{"lambda_cycle", loss_weights.lambda_cycle},
              {"lambda_identity", loss_weights.lambda_identity},
              {"lambda_fm", loss_weights.lambda_fm}}},
            {"adversarial_mode", to_string(adversarial_mode)},
            {"palette", palette_to_json(palette)}};
  if (architecture == Architecture::pix2pixhd) j["global_generator"] = generator_json(global_generator);
  return j;
}

ModelSpec ModelSpec::from_json(const json& j) {
  try {
    if (j.value("kind", "translator") != "translator") throw ValidationError("not a translator checkpoint");
    ModelSpec s;
    s.architecture = architecture_from_string(j.at("architecture"));
    s.profile = profile_from_string(j.at("profile"));
    s.tile_size = j.at("tile_size");
    s.generator = generator_from_json(j.at("generator"));
    if (j.contains("global_generator")) s.global_generator = generator_from_json(j.at("global_generator"));
    const auto& d = j.at("discriminator");
    s.discriminator = {d.at("n_layers"), d.at("scales"), d.at("conditional"), d.at("in_channels"),
                       d.at("base_width")};
    const auto& w = j.at("loss_weights");
    s.loss_weights = {w.at("lambda_cycle"), w.at("lambda_identity"), w.at("lambda_fm")};
    s.adversarial_mode = adversarial_mode_from_string(j.value("adversarial_mode", "log"));
    s.palette = palette_from_json(j.at("palette"));
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid model spec: ") + e.what());
  }
}

torch::Tensor image_to_tensor(const Image& image) {
  auto t = torch::from_blob(const_cast<float*>(image.pixels().data()),
                            {image.height(), image.width(), image.channels()}, torch::kFloat32)
               .permute({2, 0, 1})
               .unsqueeze(0)
               .clone();
  return t * 2.0 - 1.0;
}

torch::Tensor map_to_tensor(const SemanticMap& map) { return image_to_tensor(map.to_rgb()); }

Image tensor_to_image(const torch::Tensor& t) {
  auto x = t.detach().to(torch::kCPU, torch::kFloat32);
  if (x.dim() == 4) {
    if (x.size(0) != 1) throw ShapeError("tensor_to_image expects a single raster");
    x = x[0];
  }
  if (x.dim() != 3) throw ShapeError("tensor_to_image expects CxHxW");
  x = ((x + 1.0) * 0.5).clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(x.size(0)), static_cast<int>(x.size(1)), static_cast<int>(x.size(2)));
  std::copy_n(x.data_ptr<float>(), out.size(), out.pixels().begin());
  return out;
}

torch::Tensor stack_maps(const std::vector<const SemanticMap*>& maps) {
  std::vector<torch::Tensor> ts;
  for (const auto* m : maps) ts.push_back(map_to_tensor(*m));
  return torch::cat(ts, 0);
}

torch::Tensor stack_images(const std::vector<const Image*>& images) {
  std::vector<torch::Tensor> ts;
  for (const auto* m : images) ts.push_back(image_to_tensor(*m));
  return torch::cat(ts, 0);
}

TranslatorModel::TranslatorModel(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  torch::manual_seed(seed);
  if (spec_.architecture == Architecture::cyclegan) {
    g_ = ResnetGenerator(spec_.generator);
    f_ = ResnetGenerator(spec_.generator);
    d_x_ = PatchDiscriminator(spec_.discriminator);
    d_y_ = PatchDiscriminator(spec_.discriminator);
  } else {
    hd_ = Pix2pixHDGenerator(spec_.global_generator, spec_.generator);
    for (int k = 0; k < spec_.discriminator.scales; ++k) hd_ds_.emplace_back(spec_.discriminator);
  }
  for (auto& [name, m] : modules()) init_weights(*m);
  if (hd_) hd_->local->zero_output_layer();
}

std::vector<std::pair<std::string, torch::nn::Module*>> TranslatorModel::modules() const {
  std::vector<std::pair<std::string, torch::nn::Module*>> out;
  if (spec_.architecture == Architecture::cyclegan) {
    out = {{"generator_g", g_.ptr().get()}, {"generator_f", f_.ptr().get()}, {"discriminator_x", d_x_.ptr().get()},
           {"discriminator_y", d_y_.ptr().get()}};
  } else {
    out.emplace_back("generator", hd_.ptr().get());
    for (std::size_t k = 0; k < hd_ds_.size(); ++k) {
      out.emplace_back("discriminator_" + std::to_string(k + 1), hd_ds_[k].ptr().get());
    }
  }
  return out;
}

torch::Tensor TranslatorModel::translate(const torch::Tensor& map) {
  return spec_.architecture == Architecture::cyclegan ? g_->forward(map) : hd_->forward(map);
}

torch::Tensor TranslatorModel::translate_back(const torch::Tensor& image) {
  if (spec_.architecture != Architecture::cyclegan) {
    throw InvalidArgument("image-to-map translation needs a CycleGAN model");
  }
  return f_->forward(image);
}

std::vector<torch::Tensor> TranslatorModel::generator_parameters() {
  if (spec_.architecture == Architecture::pix2pixhd) return hd_->parameters();
  auto p = g_->parameters();
  auto q = f_->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

std::vector<torch::Tensor> TranslatorModel::discriminator_parameters() {
  std::vector<torch::Tensor> p;
  if (spec_.architecture == Architecture::cyclegan) {
    p = d_x_->parameters();
    auto q = d_y_->parameters();
    p.insert(p.end(), q.begin(), q.end());
  } else {
    for (auto& d : hd_ds_) {
      auto q = d->parameters();
      p.insert(p.end(), q.begin(), q.end());
    }
  }
  return p;
}

std::vector<torch::Tensor> TranslatorModel::all_parameters() {
  auto p = generator_parameters();
  auto q = discriminator_parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

CycleGanNetworks TranslatorModel::cyclegan_networks() {
  if (spec_.architecture != Architecture::cyclegan) throw InvalidArgument("not a CycleGAN model");
  auto g = g_;
  auto f = f_;
  auto dx = d_x_;
  auto dy = d_y_;
  return {[g](const torch::Tensor& x) mutable { return g->forward(x); },
          [f](const torch::Tensor& y) mutable { return f->forward(y); },
          [dx](const torch::Tensor& x) mutable { return dx->forward(x); },
          [dy](const torch::Tensor& y) mutable { return dy->forward(y); }};
}

std::vector<TappedDiscriminator> TranslatorModel::tapped_discriminators() {
  if (spec_.architecture != Architecture::pix2pixhd) throw InvalidArgument("not a pix2pixHD model");
  std::vector<TappedDiscriminator> out;
  for (auto d : hd_ds_) {
    out.emplace_back([d](const torch::Tensor& x) mutable { return d->forward_features(x); });
  }
  return out;
}

void TranslatorModel::train(bool on) {
  for (auto& [name, m] : modules()) m->train(on);
}

std::vector<torch::Tensor> TranslatorModel::snapshot() {
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> out;
  for (auto& p : all_parameters()) out.push_back(p.detach().clone());
  return out;
}

void TranslatorModel::restore(const std::vector<torch::Tensor>& params) {
  torch::NoGradGuard guard;
  auto current = all_parameters();
  if (current.size() != params.size()) throw InvalidArgument("snapshot does not match model");
  for (std::size_t i = 0; i < params.size(); ++i) current[i].copy_(params[i]);
}

void TranslatorModel::save(const fs::path& dir) const {
  fs::create_directories(dir);
  io::write_text(dir / "spec.json", spec_.to_json().dump(2) + "\n");
  for (const auto& [name, m] : modules()) {
    torch::serialize::OutputArchive archive;
    m->save(archive);
    archive.save_to((dir / (name + ".pt")).string());
  }
}

TranslatorModel TranslatorModel::load(const fs::path& dir) {
  const fs::path spec_path = dir / "spec.json";
  if (!fs::exists(spec_path)) throw NotFoundError("no checkpoint at " + dir.string());
  json j;
  try {
    j = json::parse(io::read_text(spec_path));
  } catch (const json::exception& e) {
    throw ValidationError("invalid spec.json: " + std::string(e.what()));
  }
  TranslatorModel model(ModelSpec::from_json(j));
  for (auto& [name, m] : model.modules()) {
    const fs::path blob = dir / (name + ".pt");
    if (!fs::exists(blob)) throw NotFoundError("missing parameter blob " + blob.string());
    torch::serialize::InputArchive archive;
    archive.load_from(blob.string());
    m->load(archive);
  }
  return model;
}

std::vector<std::string> list_checkpoints(const fs::path& root) {
  std::vector<std::string> out;
  if (!fs::is_directory(root)) return out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "spec.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace semaforge::gan
