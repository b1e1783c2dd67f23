#include "semaforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semaforge/data.hpp"
#include "semaforge/error.hpp"
#include "semaforge/log.hpp"

namespace semaforge::metrics {

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// "valid" separable filtering of a single-channel plane (h x w) -> (h-k+1) x (w-k+1)
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
  const int ks = static_cast<int>(k.size());
  const int oh = h - ks + 1, ow = w - ks + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < ks; ++i) s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < ks; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b, const SsimOptions& options) {
  if (!a.same_shape(b)) throw ShapeError("ssim: shape mismatch");
  if (a.empty()) throw ShapeError("ssim: empty raster");
  const int h = a.height(), w = a.width(), channels = a.channels();
  int size = std::min({options.window, h, w});
  const auto kernel = gaussian_window(size, options.sigma);
  const double c1 = std::pow(0.01 * options.dynamic_range, 2);
  const double c2 = std::pow(0.03 * options.dynamic_range, 2);

  double total = 0.0;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < channels; ++c) {
    std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        pa[i] = a.at(y, x, c);
        pb[i] = b.at(y, x, c);
        aa[i] = pa[i] * pa[i];
        bb[i] = pb[i] * pb[i];
        ab[i] = pa[i] * pb[i];
      }
    }
    const auto mu_a = filter_valid(pa, h, w, kernel);
    const auto mu_b = filter_valid(pb, h, w, kernel);
    const auto e_aa = filter_valid(aa, h, w, kernel);
    const auto e_bb = filter_valid(bb, h, w, kernel);
    const auto e_ab = filter_valid(ab, h, w, kernel);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      acc += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / channels;
}

namespace {

Eigen::MatrixXd covariance(const FeatureMatrix& x, const Eigen::RowVectorXd& mean) {
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() < 2 || b.rows() < 2) throw InsufficientSamplesError("FID needs at least two samples per set");
  if (a.cols() != b.cols()) throw ShapeError("FID feature dimensions differ");
  const Eigen::RowVectorXd mu_a = a.colwise().mean();
  const Eigen::RowVectorXd mu_b = b.colwise().mean();
  const auto cov_a = covariance(a, mu_a);
  const auto cov_b = covariance(b, mu_b);
  // tr((S_a S_b)^1/2) = tr((S_a^1/2 S_b S_a^1/2)^1/2), the inner product being symmetric PSD.
  const Eigen::MatrixXd root_a = psd_sqrt(cov_a);
  const Eigen::MatrixXd inner = root_a * cov_b * root_a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  return std::max(value, 0.0);
}

double kid(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows() < 2 || b.rows() < 2) throw InsufficientSamplesError("KID needs at least two samples per set");
  if (a.cols() != b.cols()) throw ShapeError("KID feature dimensions differ");
  const double d = static_cast<double>(a.cols());
  auto kernel = [d](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return ((x * y.transpose()).array() / d + 1.0).cube().matrix().eval();
  };
  const auto kxx = kernel(a, a);
  const auto kyy = kernel(b, b);
  const auto kxy = kernel(a, b);
  const double m = static_cast<double>(a.rows()), n = static_cast<double>(b.rows());
  const double sxx = kxx.sum() - kxx.trace();
  const double syy = kyy.sum() - kyy.trace();
  return sxx / (m * (m - 1.0)) + syy / (n * (n - 1.0)) - 2.0 * kxy.sum() / (m * n);
}

std::vector<std::pair<int, int>> qualifying_patches(const BinaryMask& exclusion, const PatchProtocol& p) {
  if (p.stride < 1 || p.patch < 1) throw InvalidArgument("patch and stride must be positive");
  if (p.min_clean_fraction < 0.0 || p.min_clean_fraction > 1.0) {
    throw InvalidArgument("min_clean_fraction must lie in [0, 1]");
  }
  std::vector<std::pair<int, int>> out;
  if (exclusion.height() < p.patch || exclusion.width() < p.patch) return out;
  const double area = static_cast<double>(p.patch) * p.patch;
  for (auto o : window_origins(exclusion.height(), exclusion.width(), p.patch, p.stride)) {
    std::size_t masked = 0;
    for (int y = o.y; y < o.y + p.patch; ++y) {
      for (int x = o.x; x < o.x + p.patch; ++x) masked += exclusion.at(y, x);
    }
    const double clean = 1.0 - static_cast<double>(masked) / area;
    if (clean >= p.min_clean_fraction) out.emplace_back(o.y, o.x);
  }
  return out;
}

nlohmann::json MetricReport::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"fid", num(fid)},
          {"kid", num(kid)},
          {"ssim", num(ssim)},
          {"n_patches", n_patches},
          {"empty", empty},
          {"protocol",
           {{"patch", protocol.patch},
            {"stride", protocol.stride},
            {"min_clean_fraction", protocol.min_clean_fraction},
            {"n_examples", protocol.n_examples}}}};
}

MetricReport evaluate_dataset(std::span<const Image> pristine, std::span<const Image> generated,
                              std::span<const BinaryMask> exclusion, const PatchProtocol& protocol,
                              Embedder& embedder) {
  if (pristine.size() != generated.size() || pristine.size() != exclusion.size()) {
    throw InvalidArgument("evaluate: pristine, generated and mask counts differ");
  }
  MetricReport report;
  report.protocol = protocol;
  std::vector<Image> pa, pb;
  double ssim_sum = 0.0;
  for (std::size_t i = 0; i < pristine.size(); ++i) {
    if (!pristine[i].same_shape(generated[i])) throw ShapeError("pristine and generated images differ in shape");
    if (exclusion[i].height() != pristine[i].height() || exclusion[i].width() != pristine[i].width()) {
      throw ShapeError("exclusion mask does not match image");
    }
    for (auto [y, x] : qualifying_patches(exclusion[i], protocol)) {
      pa.push_back(pristine[i].crop(y, x, protocol.patch, protocol.patch));
      pb.push_back(generated[i].crop(y, x, protocol.patch, protocol.patch));
      ssim_sum += ssim(pa.back(), pb.back());
    }
  }
  report.n_patches = pa.size();
  if (pa.empty()) {
    report.empty = true;
    report.fid = report.kid = report.ssim = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  report.ssim = ssim_sum / static_cast<double>(pa.size());
  if (pa.size() < 2) {
    log_warn("only one qualifying patch; FID and KID are undefined");
    report.fid = report.kid = std::numeric_limits<double>::quiet_NaN();
    return report;
  }
  const auto fa = embedder.embed(pa);
  const auto fb = embedder.embed(pb);
  report.fid = fid(fa, fb);
  report.kid = kid(fa, fb);
  return report;
}

MetricReport evaluate_pairs(const Image& pristine, const Image& generated, const BinaryMask& exclusion,
                            const PatchProtocol& protocol, Embedder& embedder) {
  return evaluate_dataset({&pristine, 1}, {&generated, 1}, {&exclusion, 1}, protocol, embedder);
}

}  // namespace semaforge::metrics
