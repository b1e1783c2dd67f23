#include "semaforge/forensics/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "semaforge/error.hpp"
#include "semaforge/forensics/auc.hpp"

namespace semaforge::forensics {

EvalSet eval_set_from_dataset(const PatchDataset& data, Split split) {
  EvalSet e;
  for (auto i : data.indices(split)) {
    e.patches.push_back(data.patch(i));
    e.labels.push_back(data.label(i) == PatchLabel::generated);
  }
  if (e.patches.empty()) throw EmptyDatasetError(std::string("no ") + to_string(split) + " patches");
  return e;
}

EvalSet eval_set_from_forgeries(std::span<const manip::ForgeryRecord> forgeries, std::span<const Image> pristine,
                                int patch) {
  EvalSet e;
  const double area = static_cast<double>(patch) * patch;
  for (const auto& f : forgeries) {
    const auto& m = f.mask.mask;
    if (f.blended.height() < patch || f.blended.width() < patch) continue;
    for (auto o : window_origins(f.blended.height(), f.blended.width(), patch, patch)) {
      std::size_t inside = 0;
      for (int y = o.y; y < o.y + patch; ++y) {
        for (int x = o.x; x < o.x + patch; ++x) inside += m.at(y, x);
      }
      if (inside >= area / 2.0) {
        e.patches.push_back(f.blended.crop(o.y, o.x, patch, patch));
        e.labels.push_back(1);
      } else if (inside == 0) {
        e.patches.push_back(f.pristine.crop(o.y, o.x, patch, patch));
        e.labels.push_back(0);
      }
    }
  }
  for (const auto& img : pristine) {
    if (img.height() < patch || img.width() < patch) continue;
    for (auto o : window_origins(img.height(), img.width(), patch, patch)) {
      e.patches.push_back(img.crop(o.y, o.x, patch, patch));
      e.labels.push_back(0);
    }
  }
  if (e.patches.empty()) throw EmptyDatasetError("no evaluation patches");
  return e;
}

std::vector<TransformGrid> default_sweep_grids() {
  return {{TransformKind::gamma, {0.5, 0.75, 1.0, 1.5, 2.0}},
          {TransformKind::gaussian_noise, {0.0, 0.02, 0.05, 0.1}},
          {TransformKind::gaussian_blur, {0.0, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0}},
          {TransformKind::upscale, {1.0, 1.25, 1.5, 2.0}},
          {TransformKind::upscale_downscale, {1.0, 1.25, 1.5, 2.0}},
          {TransformKind::rotate_cw, {0.0, 5.0, 15.0, 30.0}},
          {TransformKind::rotate_ccw, {0.0, 5.0, 15.0, 30.0}}};
}

double RobustnessCurve::mean_auc() const {
  if (auc.empty()) return 0.0;
  double s = 0.0;
  for (double a : auc) s += a;
  return s / static_cast<double>(auc.size());
}

double RobustnessCurve::auc_at(double parameter) const {
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    if (parameters[i] == parameter) return auc[i];
  }
  throw NotFoundError("parameter not on the grid");
}

std::vector<RobustnessCurve> robustness_sweep(const PatchScorer& scorer, const EvalSet& eval,
                                              const std::vector<TransformGrid>& grids, const std::string& label,
                                              std::uint64_t seed) {
  if (eval.patches.empty()) throw EmptyDatasetError("empty evaluation set");
  if (eval.patches.size() != eval.labels.size()) throw ShapeError("patch and label counts differ");
  const auto clean = scorer(eval.patches);
  std::vector<RobustnessCurve> out;
  for (std::size_t g = 0; g < grids.size(); ++g) {
    const auto& grid = grids[g];
    if (!std::is_sorted(grid.parameters.begin(), grid.parameters.end())) {
      throw ValidationError(std::string("grid for ") + to_string(grid.kind) + " is not ascending");
    }
    RobustnessCurve c{grid.kind, label, grid.parameters, {}, {}};
    for (std::size_t p = 0; p < grid.parameters.size(); ++p) {
      const double param = grid.parameters[p];
      std::vector<double> scores;
      if (param == identity_parameter(grid.kind)) {
        scores = clean;
      } else {
        std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (g * 1000 + p + 1)));
        std::vector<Image> transformed;
        transformed.reserve(eval.patches.size());
        for (const auto& patch : eval.patches) transformed.push_back(apply_transform(patch, grid.kind, param, rng));
        scores = scorer(transformed);
      }
      c.auc.push_back(roc_auc(scores, eval.labels));
      c.accuracy.push_back(accuracy_at(scores, eval.labels, 0.5));
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string curves_to_csv(std::span<const RobustnessCurve> curves) {
  std::ostringstream os;
  os << "detector,transform,parameter,auc,accuracy\n" << std::setprecision(10);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.parameters.size(); ++i) {
      os << c.detector << ',' << to_string(c.kind) << ',' << c.parameters[i] << ',' << c.auc[i] << ','
         << c.accuracy[i] << '\n';
    }
  }
  return os.str();
}

nlohmann::json curves_to_json(std::span<const RobustnessCurve> curves) {
  auto j = nlohmann::json::array();
  for (const auto& c : curves) {
    j.push_back({{"detector", c.detector},
                 {"transform", to_string(c.kind)},
                 {"parameters", c.parameters},
                 {"auc", c.auc},
                 {"accuracy", c.accuracy},
                 {"mean_auc", c.mean_auc()}});
  }
  return j;
}

namespace {

void put(Image& img, int y, int x, const std::array<float, 3>& rgb) {
  if (y < 0 || y >= img.height() || x < 0 || x >= img.width()) return;
  for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
}

void line(Image& img, int y0, int x0, int y1, int x1, const std::array<float, 3>& rgb) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, y0, x0, rgb);
    put(img, y0 + 1, x0, rgb);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

Image plot_curves(std::span<const RobustnessCurve> curves, TransformKind kind, int width, int height) {
  static const std::array<std::array<float, 3>, 4> colors{
      {{0.12f, 0.47f, 0.71f}, {0.84f, 0.15f, 0.16f}, {0.17f, 0.63f, 0.17f}, {0.58f, 0.40f, 0.74f}}};
  Image img(height, width, 3);
  std::fill(img.pixels().begin(), img.pixels().end(), 1.0f);
  const int left = 30, right = width - 10, top = 10, bottom = height - 25;
  const std::array<float, 3> axis{0.2f, 0.2f, 0.2f}, grid{0.88f, 0.88f, 0.88f};
  // AUC axis spans [0.4, 1.0]
  auto to_y = [&](double auc) {
    return bottom - static_cast<int>(std::lround((std::clamp(auc, 0.4, 1.0) - 0.4) / 0.6 * (bottom - top)));
  };
  for (double a : {0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) line(img, to_y(a), left, to_y(a), right, grid);
  line(img, bottom, left, bottom, right, axis);
  line(img, top, left, bottom, left, axis);

  std::size_t color = 0;
  for (const auto& c : curves) {
    if (c.kind != kind || c.parameters.empty()) continue;
    const double lo = c.parameters.front(), hi = c.parameters.back();
    auto to_x = [&](double p) {
      return hi > lo ? left + static_cast<int>(std::lround((p - lo) / (hi - lo) * (right - left))) : (left + right) / 2;
    };
    const auto& rgb = colors[color++ % colors.size()];
    for (std::size_t i = 0; i + 1 < c.parameters.size(); ++i) {
      line(img, to_y(c.auc[i]), to_x(c.parameters[i]), to_y(c.auc[i + 1]), to_x(c.parameters[i + 1]), rgb);
    }
    for (std::size_t i = 0; i < c.parameters.size(); ++i) {
      for (int d = -2; d <= 2; ++d) {
        put(img, to_y(c.auc[i]) + d, to_x(c.parameters[i]), rgb);
        put(img, to_y(c.auc[i]), to_x(c.parameters[i]) + d, rgb);
      }
    }
  }
  return img;
}

}  // namespace semaforge::forensics
