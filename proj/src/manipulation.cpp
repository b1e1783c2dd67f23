#include "semaforge/manipulation.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <ctime>

#include "semaforge/error.hpp"
#include "semaforge/io.hpp"
#include "semaforge/log.hpp"
#include "semaforge/training.hpp"

namespace semaforge::manip {

using nlohmann::json;

std::vector<std::pair<int, int>> disc_offsets(int radius) {
  if (radius < 0) throw InvalidArgument("radius must be non-negative");
  std::vector<std::pair<int, int>> out;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dy * dy + dx * dx <= radius * radius) out.emplace_back(dy, dx);
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius == 0) return mask;
  const auto disc = disc_offsets(radius);
  BinaryMask out(mask.height(), mask.width());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      for (auto [dy, dx] : disc) {
        const int yy = y + dy, xx = x + dx;
        if (yy >= 0 && yy < mask.height() && xx >= 0 && xx < mask.width()) out.at(yy, xx) = 1;
      }
    }
  }
  return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
  if (radius == 0) return mask;
  const auto disc = disc_offsets(radius);
  BinaryMask out(mask.height(), mask.width());
  const int h = mask.height(), w = mask.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool inside = true;
      for (auto [dy, dx] : disc) {
        if (!mask.at(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1))) {
          inside = false;
          break;
        }
      }
      out.at(y, x) = inside;
    }
  }
  return out;
}

ManipulationMask derive_mask(const SemanticMap& original, const SemanticMap& tampered, int dilation,
                             int feather_radius) {
  if (original.height() != tampered.height() || original.width() != tampered.width()) {
    throw ShapeError("original and tampered maps differ in size");
  }
  if (dilation < 0 || feather_radius < 0) throw InvalidArgument("dilation and feather must be non-negative");
  BinaryMask diff(original.height(), original.width());
  for (int y = 0; y < original.height(); ++y) {
    for (int x = 0; x < original.width(); ++x) {
      diff.at(y, x) = original.palette()[original.at(y, x)].color != tampered.palette()[tampered.at(y, x)].color;
    }
  }
  return {dilate(diff, dilation), feather_radius, dilation};
}

std::vector<float> feather_alpha(const BinaryMask& mask, int r) {
  if (r < 0) throw InvalidArgument("feather radius must be non-negative");
  const int h = mask.height(), w = mask.width();
  std::vector<float> alpha(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) alpha[static_cast<std::size_t>(y) * w + x] = mask.at(y, x);
  }
  if (r == 0) return alpha;

  const auto disc = disc_offsets(r);
  const double sigma = r / 3.0;
  std::vector<double> weights;
  double total = 0.0;
  for (auto [dy, dx] : disc) {
    weights.push_back(std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma)));
    total += weights.back();
  }
  const auto core = erode(mask, r);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float& a = alpha[static_cast<std::size_t>(y) * w + x];
      if (core.at(y, x)) {
        a = 1.0f;
        continue;
      }
      double s = 0.0;
      for (std::size_t k = 0; k < disc.size(); ++k) {
        const int yy = std::clamp(y + disc[k].first, 0, h - 1);
        const int xx = std::clamp(x + disc[k].second, 0, w - 1);
        if (mask.at(yy, xx)) s += weights[k];
      }
      a = static_cast<float>(std::clamp(s / total, 0.0, 1.0));
    }
  }
  return alpha;
}

const char* to_string(BlendMethod m) { return m == BlendMethod::alpha ? "alpha" : "poisson"; }

BlendMethod blend_method_from_string(const std::string& s) {
  if (s == "alpha") return BlendMethod::alpha;
  if (s == "poisson") return BlendMethod::poisson;
  throw InvalidArgument("unknown blend method '" + s + "'");
}

namespace {

void check_shapes(const ImageTile& pristine, const ImageTile& generated, const BinaryMask& mask) {
  if (!pristine.same_shape(generated)) throw ShapeError("pristine and generated images differ in shape");
  if (mask.height() != pristine.height() || mask.width() != pristine.width()) {
    throw ShapeError("mask does not match the images");
  }
}

}  // namespace

ImageTile blend(const ImageTile& pristine, const ImageTile& generated, const ManipulationMask& mask) {
  check_shapes(pristine, generated, mask.mask);
  const auto alpha = feather_alpha(mask.mask, mask.feather_radius);
  ImageTile out = pristine;
  const int w = pristine.width();
  for (int y = 0; y < pristine.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const float a = alpha[static_cast<std::size_t>(y) * w + x];
      if (a == 0.0f) continue;
      for (int c = 0; c < pristine.channels(); ++c) {
        out.at(y, x, c) = a == 1.0f ? generated.at(y, x, c) : a * generated.at(y, x, c) + (1.0f - a) * pristine.at(y, x, c);
      }
    }
  }
  return out;
}

ImageTile poisson_blend(const ImageTile& pristine, const ImageTile& generated, const BinaryMask& mask) {
  check_shapes(pristine, generated, mask);
  const int h = pristine.height(), w = pristine.width();
  std::vector<int> index(static_cast<std::size_t>(h) * w, -1);
  int n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(y, x)) index[static_cast<std::size_t>(y) * w + x] = n++;
    }
  }
  ImageTile out = pristine;
  if (n == 0) return out;

  constexpr int dy[] = {-1, 1, 0, 0};
  constexpr int dx[] = {0, 0, -1, 1};
  std::vector<Eigen::Triplet<double>> triplets;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = index[static_cast<std::size_t>(y) * w + x];
      if (i < 0) continue;
      int degree = 0;
      for (int k = 0; k < 4; ++k) {
        const int yy = y + dy[k], xx = x + dx[k];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        ++degree;
        const int j = index[static_cast<std::size_t>(yy) * w + xx];
        if (j >= 0) triplets.emplace_back(i, j, -1.0);
      }
      triplets.emplace_back(i, i, static_cast<double>(degree));
    }
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success) throw DomainError("Poisson system factorization failed");

  for (int c = 0; c < pristine.channels(); ++c) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int i = index[static_cast<std::size_t>(y) * w + x];
        if (i < 0) continue;
        for (int k = 0; k < 4; ++k) {
          const int yy = y + dy[k], xx = x + dx[k];
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          b[i] += generated.at(y, x, c) - generated.at(yy, xx, c);
          if (index[static_cast<std::size_t>(yy) * w + xx] < 0) b[i] += pristine.at(yy, xx, c);
        }
      }
    }
    const Eigen::VectorXd v = solver.solve(b);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int i = index[static_cast<std::size_t>(y) * w + x];
        if (i >= 0) out.at(y, x, c) = static_cast<float>(std::clamp(v[i], 0.0, 1.0));
      }
    }
  }
  return out;
}

void BlendConfig::validate() const {
  if (dilation < 0) throw ValidationError("dilation must be non-negative");
  if (feather_radius < 0) throw ValidationError("feather_radius must be non-negative");
}

json BlendConfig::to_json() const {
  return {{"dilation", dilation}, {"feather_radius", feather_radius}, {"method", to_string(method)}};
}

BlendConfig BlendConfig::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("blend config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "dilation" && key != "feather_radius" && key != "method") {
      throw ValidationError("unknown blend key '" + key + "'");
    }
  }
  BlendConfig c;
  try {
    c.dilation = j.value("dilation", c.dilation);
    c.feather_radius = j.value("feather_radius", c.feather_radius);
    c.method = blend_method_from_string(j.value("method", std::string("alpha")));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid blend config: ") + e.what());
  }
  c.validate();
  return c;
}

json ForgeryRecord::provenance() const {
  return {{"checkpoint_id", checkpoint_id},
          {"source_id", source_id},
          {"created_at", created_at},
          {"blend", config.to_json()},
          {"height", pristine.height()},
          {"width", pristine.width()},
          {"mask_pixels", mask.mask.count()},
          {"files",
           {{"blended", "blended.png"}, {"generated", "generated.png"}, {"mask", "mask.png"}, {"pristine", "pristine.png"}}}};
}

void ForgeryRecord::write(const std::filesystem::path& dir) const {
  io::write_png(dir / "blended.png", blended);
  io::write_png(dir / "generated.png", generated);
  io::write_png(dir / "mask.png", mask.mask.to_image());
  io::write_png(dir / "pristine.png", pristine);
  io::write_text(dir / "provenance.json", provenance().dump(2) + "\n");
}

ForgeryRecord ForgeryRecord::read(const std::filesystem::path& dir) {
  json p;
  try {
    p = json::parse(io::read_text(dir / "provenance.json"));
  } catch (const json::exception& e) {
    throw ValidationError("invalid provenance in " + dir.string() + ": " + e.what());
  }
  ForgeryRecord r;
  r.config = BlendConfig::from_json(p.at("blend"));
  r.checkpoint_id = p.value("checkpoint_id", std::string());
  r.source_id = p.value("source_id", std::string());
  r.created_at = p.value("created_at", std::string());
  r.blended = io::read_png(dir / "blended.png");
  r.generated = io::read_png(dir / "generated.png");
  r.pristine = io::read_png(dir / "pristine.png");
  r.mask = {BinaryMask::from_image(io::read_png(dir / "mask.png", 1)), r.config.feather_radius, r.config.dilation};
  if (!r.blended.same_shape(r.pristine) || r.mask.mask.height() != r.blended.height() ||
      r.mask.mask.width() != r.blended.width()) {
    throw ShapeError("forgery files in " + dir.string() + " differ in size");
  }
  return r;
}

std::string utc_timestamp(bool deterministic) {
  const std::time_t t = deterministic ? 0 : std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ForgeryRecord forge(gan::TranslatorModel& model, const PairedSample& sample, const SemanticMap& tampered,
                    const BlendConfig& config, const std::string& checkpoint_id, bool deterministic) {
  config.validate();
  validate_sample(sample);
  ForgeryRecord r;
  r.original_map = sample.map;
  r.tampered_map = tampered;
  r.pristine = sample.image;
  r.config = config;
  r.checkpoint_id = checkpoint_id;
  r.source_id = sample.source_id;
  r.created_at = utc_timestamp(deterministic);
  r.mask = derive_mask(sample.map, tampered, config.dilation, config.feather_radius);
  if (!r.mask.mask.any()) log_warn("tampered map equals the original; the forgery is the pristine image");
  r.generated = training::generate(model, tampered);
  if (!r.generated.same_shape(r.pristine)) throw ShapeError("generator output does not match the pristine image");
  r.blended = config.method == BlendMethod::alpha ? blend(r.pristine, r.generated, r.mask)
                                                  : poisson_blend(r.pristine, r.generated, r.mask.mask);
  return r;
}

}  // namespace semaforge::manip
