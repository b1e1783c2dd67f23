// Acceptance run: one PASS/FAIL line per headline criterion, exit status 1
// when any of them fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "semaforge/cli.hpp"
#include "semaforge/data.hpp"
#include "semaforge/embedder.hpp"
#include "semaforge/forensics/detector.hpp"
#include "semaforge/forensics/heatmap.hpp"
#include "semaforge/forensics/robustness.hpp"
#include "semaforge/gan/losses.hpp"
#include "semaforge/io.hpp"
#include "semaforge/log.hpp"
#include "semaforge/manipulation.hpp"
#include "semaforge/metrics.hpp"
#include "semaforge/synthetic.hpp"
#include "semaforge/training.hpp"

using namespace semaforge;
namespace fs = std::filesystem;

namespace {

/// Collects failed checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::abs(got - want) <= tol, s.str());
  }
  void at_most(double got, double bound, const std::string& what) {
    std::ostringstream s;
    s << what << ": " << got << " > " << bound;
    expect(got <= bound, s.str());
  }
  void note(const std::string& n) { notes_.push_back(n); }

  bool passed() const { return failures_.empty(); }
  int total() const { return total_; }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  int total_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

bool g_all_passed = true;

void criterion(const std::string& name, const std::function<void(Checks&)>& body) {
  Checks c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g_all_passed = g_all_passed && c.passed();
  std::printf("%s  %-22s %d checks, %.1fs", c.passed() ? "PASS" : "FAIL", name.c_str(), c.total(), secs);
  for (const auto& n : c.notes()) std::printf("; %s", n.c_str());
  std::printf("\n");
  for (const auto& f : c.failures()) std::printf("      - %s\n", f.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// stand-in networks for the loss checks

using gan::Mapping;

torch::Tensor rnd(std::vector<int64_t> shape, int seed) {
  torch::manual_seed(seed);
  return torch::rand(shape, torch::kDouble);
}

torch::Tensor scalar_batch(std::vector<double> v) {
  return torch::tensor(v, torch::kDouble).view({-1, 1, 1, 1});
}

Mapping constant_d(double p) {
  return [p](const torch::Tensor& x) { return torch::full({x.size(0), 1, 1, 1}, p, x.options()); };
}

Mapping smooth_d(double w, double b) {
  return [w, b](const torch::Tensor& x) { return torch::sigmoid(w * x.mean(1, true) + b); };
}

gan::TappedDiscriminator tapped(double w) {
  return [w](const torch::Tensor& x) {
    gan::DiscriminatorOutput o;
    o.features = {torch::tanh(w * x), x * x};
    o.probability = torch::sigmoid(w * x.mean(1, true));
    return o;
  };
}

gan::TappedDiscriminator tapped_constant(double p) {
  return [p](const torch::Tensor& x) {
    gan::DiscriminatorOutput o;
    o.features = {x};
    o.probability = torch::full({x.size(0), 1, 1, 1}, p, x.options());
    return o;
  };
}

double val(const torch::Tensor& t) { return t.item<double>(); }

const double kHalfHalf = 2.0 * std::log(2.0);  // -2 log 0.5

// ---------------------------------------------------------------------------

void loss_oracles(Checks& c) {
  const Mapping id = [](const torch::Tensor& t) { return t; };
  const auto x = rnd({2, 3, 4, 4}, 1), y = rnd({2, 3, 4, 4}, 2);

  // cycle consistency
  c.expect(val(gan::cycle_consistency_loss(id, id, x, y)) == 0.0, "cycle: identity pair is 0");
  const Mapping twice = [](const torch::Tensor& t) { return 2.0 * t; };
  c.near(val(gan::cycle_consistency_loss(twice, id, scalar_batch({1.0}), scalar_batch({2.0}))), 3.0, 1e-12,
         "cycle: G=2x, F=y, x=1, y=2");
  for (double shift : {-0.7, 0.25, 3.0}) {
    const Mapping g = [shift](const torch::Tensor& t) { return t + shift; };
    const Mapping f = [shift](const torch::Tensor& t) { return t - shift; };
    c.near(val(gan::cycle_consistency_loss(g, f, x, y)), 0.0, 1e-12, "cycle: exact inverse pair");
  }

  // identity
  c.expect(val(gan::identity_loss(id, id, x, y)) == 0.0, "identity: identity generators give 0");
  const Mapping plus_one = [](const torch::Tensor& t) { return t + 1.0; };
  c.near(val(gan::identity_loss(id, plus_one, scalar_batch({0.1, 0.5, 0.9}), scalar_batch({0.2, 0.4}))), 1.0, 1e-12,
         "identity: F=x+1, G=id");
  const auto xs = scalar_batch({0.1, 0.5, 0.9}), xr = scalar_batch({0.9, 0.1, 0.5});
  c.near(val(gan::identity_loss(plus_one, twice, xs, xs)), val(gan::identity_loss(plus_one, twice, xr, xr)), 1e-12,
         "identity: invariant to batch order");

  // adversarial
  const auto half = gan::gan_loss(constant_d(0.5), x, y);
  c.near(val(half.d_loss), 1.3863, 1e-4, "gan: D=0.5 discriminator loss");
  c.near(val(half.d_loss), kHalfHalf, 1e-12, "gan: D=0.5 equals -2 log 0.5");
  c.near(val(half.g_loss), std::log(2.0), 1e-12, "gan: D=0.5 generator loss");
  const auto perfect = gan::discriminator_loss(torch::ones({1, 1, 2, 2}, torch::kDouble),
                                               torch::zeros({1, 1, 2, 2}, torch::kDouble));
  const double clamp_term = -std::log(1.0 - gan::kProbabilityEpsilon);
  c.near(val(perfect), 2.0 * clamp_term, 1e-12, "gan: perfect discriminator is clamped, not infinite");
  c.near(val(gan::generator_loss(torch::zeros({1, 1, 2, 2}, torch::kDouble))), -std::log(gan::kProbabilityEpsilon),
         1e-9, "gan: fooled-never generator loss is -log eps");

  // CycleGAN objective
  gan::CycleGanNetworks nets{id, id, constant_d(0.5), constant_d(0.5)};
  const auto full = gan::cyclegan_objective(nets, gan::LossWeights{}, x, y);
  c.near(val(full.total), 2.0 * 1.3863, 2e-4, "cyclegan: identity generators with D=0.5");
  c.near(val(full.total), 2.0 * kHalfHalf, 1e-12, "cyclegan: total equals twice -2 log 0.5");
  gan::CycleGanNetworks skew{twice, plus_one, smooth_d(0.9, -0.2), smooth_d(1.4, 0.3)};
  const auto no_aux = gan::cyclegan_objective(skew, {0.0, 0.0, 10.0}, x, y);
  c.near(val(no_aux.total), val(no_aux.adversarial_xy) + val(no_aux.adversarial_yx), 1e-9,
         "cyclegan: zero lambdas leave the adversarial sum");
  const auto w1 = gan::cyclegan_objective(skew, {10.0, 5.0, 10.0}, x, y);
  const auto w2 = gan::cyclegan_objective(skew, {20.0, 5.0, 10.0}, x, y);
  c.near(val(w2.total) - val(w1.total), 10.0 * val(w1.cycle), 1e-9, "cyclegan: doubling lambda doubles the cycle term");
  c.near(val(w1.total),
         val(w1.adversarial_xy) + val(w1.adversarial_yx) + 10.0 * val(w1.cycle) + 5.0 * val(w1.identity), 1e-9,
         "cyclegan: total is the weighted term sum");

  // multi-scale
  const auto map = rnd({1, 1, 8, 8}, 3), real = rnd({1, 1, 8, 8}, 4), fake = rnd({1, 1, 8, 8}, 5);
  std::vector<Mapping> halves(3, constant_d(0.5));
  const auto ms = gan::multiscale_gan_terms(halves, map, real, fake);
  c.near(val(ms.sum.d_loss), 4.1589, 1e-4, "multiscale: three D=0.5 scales");
  c.near(val(ms.sum.d_loss), 3.0 * kHalfHalf, 1e-12, "multiscale: equals 3 x -2 log 0.5");
  std::vector<Mapping> ds{smooth_d(1.5, 0.1), smooth_d(-0.8, 0.2), smooth_d(0.6, -0.3)};
  std::vector<Mapping> permuted{ds[2], ds[0], ds[1]};
  const auto a = gan::multiscale_gan_terms(ds, map, real, fake);
  double per_scale_sum = 0.0;
  for (const auto& t : a.per_scale) per_scale_sum += val(t.d_loss);
  c.near(val(a.sum.d_loss), per_scale_sum, 1e-12, "multiscale: sum of per-scale terms");
  const auto one = gan::multiscale_gan_terms({ds[0]}, map, real, fake);
  const auto plain = gan::gan_loss(ds[0], torch::cat({map, real}, 1), torch::cat({map, fake}, 1));
  c.near(val(one.sum.d_loss), val(plain.d_loss), 1e-12, "multiscale: one scale is the conditional gan loss");
  c.near(val(one.sum.g_loss), val(plain.g_loss), 1e-12, "multiscale: one scale generator side");
  // Permuting the discriminators moves each to another scale; the sum over
  // scales of a fixed assignment is order-free.
  const auto pa = gan::multiscale_gan_terms(permuted, map, real, fake);
  double rebuilt = 0.0;
  for (std::size_t k = 0; k < 3; ++k) rebuilt += val(pa.per_scale[k].d_loss);
  c.near(val(pa.sum.d_loss), rebuilt, 1e-12, "multiscale: permuted scales sum");

  // feature matching
  const auto fm = gan::feature_matching_loss({torch::tensor({1.0, 2.0}, torch::kDouble).view({1, 2})},
                                             {torch::tensor({3.0, 4.0}, torch::kDouble).view({1, 2})});
  c.near(val(fm), 2.0, 1e-12, "feature matching: (1,2) vs (3,4) hand case");
  const Mapping copy_real = [&](const torch::Tensor&) { return real; };
  c.expect(val(gan::feature_matching_loss(copy_real, tapped(1.3), map, real)) == 0.0,
           "feature matching: G(map) = real gives 0");
  double prev = 1e300;
  bool monotone = true;
  const auto far = rnd({1, 2, 3, 3}, 6), tgt = rnd({1, 2, 3, 3}, 7);
  for (double t = 0.0; t <= 1.0 + 1e-12; t += 0.1) {
    const double v = val(gan::feature_matching_loss({tgt}, {far + t * (tgt - far)}));
    monotone = monotone && v <= prev + 1e-15;
    prev = v;
  }
  c.expect(monotone, "feature matching: decreases along the segment to the target");

  // pix2pixHD objective
  std::vector<gan::TappedDiscriminator> tds{tapped(1.0), tapped(0.3), tapped(-1.2)};
  const auto p = gan::pix2pixhd_terms(tds, gan::LossWeights{}, map, real, fake);
  c.near(val(p.total), val(p.adversarial) + 10.0 * val(p.feature_matching), 1e-9, "pix2pixhd: total = adv + 10 fm");
  gan::LossWeights no_fm;
  no_fm.lambda_fm = 0.0;
  std::vector<Mapping> probs;
  for (const auto& d : tds) probs.push_back([d](const torch::Tensor& t) { return d(t).probability; });
  const auto p0 = gan::pix2pixhd_terms(tds, no_fm, map, real, fake);
  c.near(val(p0.total), val(gan::multiscale_gan_terms(probs, map, real, fake).sum.g_loss), 1e-12,
         "pix2pixhd: lambda_fm = 0 is the multiscale generator side");
  const auto perfect_g = gan::pix2pixhd_terms(tds, gan::LossWeights{}, map, real, real);
  c.expect(val(perfect_g.feature_matching) == 0.0, "pix2pixhd: perfect generator has zero fm");
  const auto p_half = gan::pix2pixhd_terms({tapped_constant(0.5), tapped_constant(0.5), tapped_constant(0.5)},
                                           gan::LossWeights{}, map, real, fake);
  c.near(val(p_half.discriminator), 4.1589, 1e-4, "pix2pixhd: discriminator side with D=0.5");

  // PatchGAN score
  c.near(gan::patchgan_score(torch::full({1, 1, 5, 5}, 0.3, torch::kDouble)), 0.3, 1e-12, "patchgan: constant map");
  c.near(gan::patchgan_score(torch::tensor({0.2, 0.8}, torch::kDouble).view({1, 1, 1, 2})), 0.5, 1e-12,
         "patchgan: [0.2, 0.8]");
  const auto pm = rnd({1, 1, 4, 6}, 8);
  c.near(gan::patchgan_score(pm), gan::patchgan_score(pm.transpose(2, 3)), 1e-12, "patchgan: transpose invariant");
}

// ---------------------------------------------------------------------------

void gradient_checks(Checks& c) {
  double worst = 0.0;
  auto check = [&](const std::string& name, const std::function<torch::Tensor(const torch::Tensor&)>& f,
                   const torch::Tensor& at) {
    const double e = oracle::gradient_error(f, at);
    worst = std::max(worst, e);
    c.at_most(e, 1e-4, name + " relative error");
  };
  const auto real = rnd({1, 1, 2, 2}, 10);
  const auto D = smooth_d(1.7, -0.3);
  check("gan g_loss wrt fake", [&](const torch::Tensor& f) { return gan::gan_loss(D, real, f).g_loss; },
        rnd({1, 1, 2, 2}, 11));
  check("gan d_loss wrt fake", [&](const torch::Tensor& f) { return gan::gan_loss(D, real, f).d_loss; },
        rnd({1, 1, 2, 2}, 12));
  check("gan d_loss wrt real", [&](const torch::Tensor& r) { return gan::gan_loss(D, r, real).d_loss; },
        rnd({1, 1, 2, 2}, 13));
  check("least-squares d_loss",
        [&](const torch::Tensor& f) { return gan::gan_loss(D, real, f, gan::AdversarialMode::least_squares).d_loss; },
        rnd({1, 1, 2, 2}, 14));

  const Mapping G = [](const torch::Tensor& t) { return torch::tanh(1.3 * t) + 0.2 * t * t; };
  const Mapping F = [](const torch::Tensor& t) { return torch::sin(t) + 0.5 * t; };
  const auto y = rnd({1, 1, 3, 3}, 15);
  check("cycle loss", [&](const torch::Tensor& x) { return gan::cycle_consistency_loss(G, F, x, y); },
        rnd({1, 1, 3, 3}, 16));
  check("identity loss", [&](const torch::Tensor& x) { return gan::identity_loss(G, F, x, y); },
        rnd({1, 1, 3, 3}, 17));
  gan::CycleGanNetworks nets{G, F, smooth_d(0.9, -0.2), smooth_d(1.4, 0.3)};
  check("cyclegan total", [&](const torch::Tensor& x) { return gan::cyclegan_objective(nets, {}, x, y).total; },
        rnd({1, 1, 3, 3}, 18));
  check("cyclegan generator total",
        [&](const torch::Tensor& x) { return gan::cyclegan_objective(nets, {}, x, y).generator_total; },
        rnd({1, 1, 3, 3}, 19));

  const auto map = rnd({1, 1, 4, 4}, 20), img = rnd({1, 1, 4, 4}, 21);
  std::vector<Mapping> ds{smooth_d(1.5, 0.1), smooth_d(-0.8, 0.2), smooth_d(0.6, -0.3)};
  check("multiscale g_loss", [&](const torch::Tensor& f) { return gan::multiscale_gan_terms(ds, map, img, f).sum.g_loss; },
        rnd({1, 1, 4, 4}, 22));
  check("multiscale d_loss", [&](const torch::Tensor& r) { return gan::multiscale_gan_terms(ds, map, r, img).sum.d_loss; },
        rnd({1, 1, 4, 4}, 23));
  const auto tgt = rnd({1, 2, 2, 2}, 24);
  check("feature matching",
        [&](const torch::Tensor& f) { return gan::feature_matching_loss({tgt, tgt * 2}, {f, f * f}); },
        rnd({1, 2, 2, 2}, 25));
  std::vector<gan::TappedDiscriminator> tds{tapped(1.0), tapped(0.3), tapped(-1.2)};
  check("pix2pixhd total",
        [&](const torch::Tensor& f) { return gan::pix2pixhd_terms(tds, {}, map, img, f).total; },
        rnd({1, 1, 4, 4}, 26));
  check("pix2pixhd discriminator",
        [&](const torch::Tensor& r) { return gan::pix2pixhd_terms(tds, {}, map, r, img).discriminator; },
        rnd({1, 1, 4, 4}, 27));
  std::ostringstream w;
  w << std::scientific << std::setprecision(2) << worst;
  c.note("worst relative error " + w.str());
}

// ---------------------------------------------------------------------------

void patch_arithmetic(Checks& c) {
  const std::vector<RasterShape> shapes(470, RasterShape{512, 512});
  const auto plan = plan_patch_dataset(shapes, shapes, 64, 0.1, 0);
  c.expect(plan.patches.size() == 60160u, "total patches " + std::to_string(plan.patches.size()) + " != 60160");
  c.expect(plan.count(Split::val) == 6016u, "val patches " + std::to_string(plan.count(Split::val)) + " != 6016");
  c.expect(plan.count(Split::train) == 54144u,
           "train patches " + std::to_string(plan.count(Split::train)) + " != 54144");
  c.expect(plan.count(Split::val, PatchLabel::pristine) == plan.count(Split::val, PatchLabel::generated),
           "val split is balanced");
  c.expect(window_origins(5000, 5000, 500, 500).size() * 36 == 3600u, "36 rasters of 5000 px give 3600 tiles");
  c.expect(window_origins(512, 512, 64, 1).size() == 201601u, "stride-1 windows of 512 px");
  c.note("60160 = 54144 train + 6016 val");
}

// ---------------------------------------------------------------------------

BinaryMask random_mask(int h, int w, std::mt19937_64& rng) {
  BinaryMask m(h, w);
  const int blobs = 1 + static_cast<int>(rng() % 4);
  for (int b = 0; b < blobs; ++b) {
    const int y0 = static_cast<int>(rng() % h), x0 = static_cast<int>(rng() % w);
    const int bh = 1 + static_cast<int>(rng() % (h / 2)), bw = 1 + static_cast<int>(rng() % (w / 2));
    for (int y = y0; y < std::min(h, y0 + bh); ++y) {
      for (int x = x0; x < std::min(w, x0 + bw); ++x) m.at(y, x) = 1;
    }
  }
  return m;
}

void blending_invariant(Checks& c) {
  std::mt19937_64 rng(2024);
  long zero_alpha_pixels = 0;
  int fixtures_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const int h = 16 + static_cast<int>(rng() % 49), w = 16 + static_cast<int>(rng() % 49);
    manip::ManipulationMask m{random_mask(h, w, rng), static_cast<int>(rng() % 8), 0};
    const auto pristine = oracle::random_quantized_image(h, w, 3, 1000 + i);
    const auto generated = oracle::random_quantized_image(h, w, 3, 2000 + i);
    const auto out = manip::blend(pristine, generated, m);
    const auto alpha = manip::feather_alpha(m.mask, m.feather_radius);
    const auto out8 = io::decode_png(io::encode_png(out)), pristine8 = io::decode_png(io::encode_png(pristine));
    bool ok = true;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (alpha[static_cast<std::size_t>(y) * w + x] != 0.0f) continue;
        // Independent reference: the zero set of alpha is everything farther
        // than the feather radius from the mask.
        ok = ok && oracle::distance_to_mask(m.mask, y, x) > m.feather_radius;
        ++zero_alpha_pixels;
        for (int ch = 0; ch < 3; ++ch) {
          ok = ok && out.at(y, x, ch) == pristine.at(y, x, ch) && out8.at(y, x, ch) == pristine8.at(y, x, ch);
        }
      }
    }
    fixtures_ok += ok;
    c.expect(ok, "fixture " + std::to_string(i) + " differs from pristine where alpha = 0");
  }
  c.note(std::to_string(fixtures_ok) + "/100 fixtures, " + std::to_string(zero_alpha_pixels) + " alpha-0 pixels");

  gan::TranslatorModel model(gan::ModelSpec::make(gan::Architecture::cyclegan, gan::Profile::toy, 64), 3);
  const auto pair = synth::make_pair(64, 5, "noop");
  const auto rec = manip::forge(model, pair, pair.map, manip::BlendConfig{}, "ckpt", true);
  c.expect(rec.mask.mask.count() == 0, "empty-mask forge has an empty mask");
  c.expect(rec.blended == pair.image, "empty-mask forge returns the pristine raster");
  c.expect(io::encode_png(rec.blended) == io::encode_png(pair.image), "empty-mask forge is byte-identical");
}

// ---------------------------------------------------------------------------

void toy_memorization(Checks& c) {
  const auto pair = synth::make_pairs(1, 64, 11);
  for (auto arch : {gan::Architecture::cyclegan, gan::Architecture::pix2pixhd}) {
    const std::string name = gan::to_string(arch);
    const auto t0 = std::chrono::steady_clock::now();
    gan::TranslatorModel model(gan::ModelSpec::make(arch, gan::Profile::toy, 64), 1);
    training::TrainConfig cfg;
    cfg.epochs = 400;
    cfg.memorization_target = 0.6;
    cfg.seed = 1;
    const auto report = training::finetune(model, pair, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto out = training::generate(model, pair.front().map);
    const double s = metrics::ssim(out, pair.front().image);
    c.expect(s >= 0.6, name + " train-pair SSIM " + fmt(s) + " < 0.6");
    c.at_most(secs, 600.0, name + " wall seconds");
    c.expect(training::generate(model, pair.front().map) == out, name + " generate is not bit-exact");
    c.note(name + " ssim " + fmt(s) + " after " + std::to_string(report.history.size()) + " epochs in " +
           fmt(secs, 0) + "s");
  }
}

// ---------------------------------------------------------------------------

metrics::FeatureMatrix gaussian_samples(int n, double mx, double my, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  metrics::FeatureMatrix m(n, 2);
  for (int i = 0; i < n; ++i) {
    m(i, 0) = mx + z(rng);
    m(i, 1) = my + z(rng);
  }
  return m;
}

std::vector<std::vector<double>> rows(const metrics::FeatureMatrix& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

void metric_oracles(Checks& c) {
  const double f = metrics::fid(gaussian_samples(10000, 0, 0, 1), gaussian_samples(10000, 3, 4, 2));
  c.near(f, 25.0, 0.5, "fid N(0,I) vs N((3,4),I)");

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0.0;
  for (int m = 2; m <= 6; ++m) {
    for (int n = 2; n <= 6; ++n) {
      metrics::FeatureMatrix a(m, 4), b(n, 4);
      for (int i = 0; i < a.size(); ++i) a.data()[i] = u(rng);
      for (int i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
      worst = std::max(worst, std::abs(metrics::kid(a, b) - oracle::kid_explicit(rows(a), rows(b))));
    }
  }
  c.at_most(worst, 1e-9, "kid vs explicit summation");

  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto img = oracle::random_image(40, 40, 3, s);
    c.expect(metrics::ssim(img, img) == 1.0, "ssim self-similarity is 1.0");
  }

  auto embedder = metrics::make_embedder("random-conv");
  const auto img = oracle::random_image(256, 256, 3, 9);
  const auto r = metrics::evaluate_pairs(img, img, BinaryMask(256, 256), metrics::PatchProtocol{}, *embedder);
  c.near(r.ssim, 1.0, 1e-12, "evaluate_pairs identical ssim");
  c.at_most(r.fid, 1e-3, "evaluate_pairs identical fid");
  c.at_most(std::abs(r.kid), 1e-3, "evaluate_pairs identical |kid|");
  c.note("fid " + fmt(f, 3) + ", identical-input kid " + std::to_string(r.kid) + " over " +
         std::to_string(r.n_patches) + " patches");
}

// ---------------------------------------------------------------------------

std::vector<double> weighted_scorer(std::span<const Image> patches) {
  std::vector<double> out;
  for (const auto& p : patches) {
    double s = 0.0;
    for (int y = 0; y < p.height(); ++y) {
      for (int x = 0; x < p.width(); ++x) s += p.at(y, x, 0) * ((y * 7 + x * 3) % 5 - 2) + p.at(y, x, 2);
    }
    out.push_back(1.0 / (1.0 + std::exp(-s / (p.height() * p.width()))));
  }
  return out;
}

void heatmap_parity(Checks& c) {
  int cases = 0;
  auto one = [](const Image& p) { return weighted_scorer(std::span<const Image>(&p, 1)).front(); };
  for (auto [h, w, patch] : std::vector<std::tuple<int, int, int>>{
           {64, 64, 64}, {66, 66, 64}, {80, 80, 64}, {71, 77, 64}, {80, 80, 16}, {33, 57, 8}}) {
    const auto img = oracle::random_image(h, w, 3, h * 131 + w);
    const auto hm = forensics::heatmap(weighted_scorer, img, patch, 1);
    const auto ref = oracle::brute_heatmap(one, img, patch, 1);
    const std::string tag = std::to_string(h) + "x" + std::to_string(w) + " patch " + std::to_string(patch);
    c.expect(hm.coverage == ref.coverage, tag + " coverage differs");
    c.expect(hm.scores == ref.scores, tag + " scores differ");
    ++cases;
  }
  const auto h66 = forensics::heatmap(weighted_scorer, oracle::random_image(66, 66, 3, 1), 64, 1);
  c.expect(h66.covered(0, 0) == 1 && h66.covered(33, 33) == 9, "66x66 coverage: corner 1, center 9");
  c.note(std::to_string(cases) + " images, stride 1, exact equality");
}

// ---------------------------------------------------------------------------

void robustness_ordering(Checks& c) {
  using namespace forensics;
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = synth::separable_patch_task(400, 64, 0.25, 3);
  const auto eval = eval_set_from_dataset(data, Split::val);
  std::map<TrainingMode, double> mean_auc;
  std::map<TrainingMode, RobustnessCurve> blur;
  double max_delta = 0.0;
  for (auto mode : {TrainingMode::plain, TrainingMode::bart, TrainingMode::adversarial}) {
    DetectorConfig cfg;
    cfg.mode = mode;
    cfg.epochs = 6;
    cfg.seed = 5;
    auto trained = train_detector(data, cfg);
    if (mode == TrainingMode::adversarial) max_delta = trained.report.max_perturbation;
    PatchScorer scorer = [&](std::span<const Image> p) { return trained.model.probabilities(p); };
    const auto curves = robustness_sweep(scorer, eval, default_sweep_grids(), to_string(mode), 1);
    double m = 0.0;
    for (const auto& curve : curves) {
      m += curve.mean_auc();
      if (curve.kind == TransformKind::gaussian_blur) blur[mode] = curve;
    }
    mean_auc[mode] = m / curves.size();
  }
  const double a5 = blur[TrainingMode::plain].auc_at(5.0), a01 = blur[TrainingMode::plain].auc_at(0.1);
  c.expect(a5 <= a01, "plain AUC at blur 5.0 (" + fmt(a5) + ") exceeds AUC at 0.1 (" + fmt(a01) + ")");
  c.expect(mean_auc[TrainingMode::bart] >= mean_auc[TrainingMode::plain],
           "BaRT mean AUC " + fmt(mean_auc[TrainingMode::bart]) + " below plain " +
               fmt(mean_auc[TrainingMode::plain]));
  const double eps = 1.0 / 255.0;
  c.expect(max_delta > 0.0, "adversarial training crafted no perturbation");
  c.at_most(max_delta, eps, "adversarial max |delta|");
  c.at_most(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 1200.0, "wall seconds");
  c.note("plain blur auc " + fmt(a01) + " -> " + fmt(a5) + "; mean auc plain " + fmt(mean_auc[TrainingMode::plain]) +
         ", bart " + fmt(mean_auc[TrainingMode::bart]) + ", adversarial " +
         fmt(mean_auc[TrainingMode::adversarial]) + "; max |delta| * 255 = " + fmt(max_delta * 255.0, 6));
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  if (fs::is_regular_file(root)) {
    out[""] = io::read_text(root);
    return out;
  }
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  }
  return out;
}

void cli_determinism(Checks& c) {
  oracle::TempDir work("acceptance_cli");
  auto P = [](const fs::path& p) { return p.string(); };
  auto run = [&](std::vector<std::string> args, std::string* out = nullptr) {
    args.insert(args.begin(), {"--log-level", "error"});
    std::ostringstream o, e;
    const int code = cli::run(args, o, e);
    if (out) *out = o.str();
    return code;
  };

  // Shared inputs for the commands that consume earlier outputs.
  const auto data = work / "data", ckpt = work / "ckpt", det = work / "det";
  c.expect(run({"--seed", "1", "prepare-data", "--out", P(data), "--count", "3", "--val-fraction", "0.34"}) == 0,
           "setup prepare-data");
  c.expect(run({"--seed", "1", "--deterministic", "train", "--data", P(data), "--out", P(ckpt), "--epochs", "1"}) == 0,
           "setup train");
  c.expect(run({"--seed", "1", "--deterministic", "train-detector", "--out", P(det), "--synthetic-task", "30",
                "--patch", "16", "--epochs", "1"}) == 0,
           "setup train-detector");
  fs::path map, image;
  for (const auto& e : fs::directory_iterator(data / "train" / "maps")) map = e.path();
  image = data / "train" / "images" / map.filename();
  auto tampered_map = io::read_map_png(map, Palette::default_map_palette());
  for (int y = 10; y < 30; ++y) {
    for (int x = 10; x < 30; ++x) tampered_map.at(y, x) = 0;
  }
  io::write_map_png(work / "tampered.png", tampered_map);
  fs::create_directories(work / "pristine");
  fs::create_directories(work / "generated");
  for (int i = 0; i < 2; ++i) {
    io::write_png(work / "pristine" / ("p" + std::to_string(i) + ".png"), oracle::random_image(64, 64, 3, i));
    io::write_png(work / "generated" / ("p" + std::to_string(i) + ".png"), oracle::random_image(64, 64, 3, 9 + i));
  }
  io::write_text(work / "bench.json", R"({"robustness": {"per_class": 30, "patch": 16,
    "detectors": [{"label": "plain", "train": {"epochs": 1}}, {"label": "bart", "train": {"mode": "bart", "epochs": 1}}],
    "grids": [{"kind": "gaussian-blur", "parameters": [0, 2]}, {"kind": "gamma", "parameters": [1, 2]}]}})");

  struct Command {
    std::string name;
    std::vector<std::string> args;  // "@" is replaced by the run's output path
  };
  const std::vector<Command> commands = {
      {"prepare-data", {"--seed", "2", "prepare-data", "--out", "@", "--count", "2"}},
      {"train", {"--seed", "2", "--deterministic", "train", "--data", P(data), "--out", "@", "--epochs", "1"}},
      {"train pix2pixhd",
       {"--seed", "2", "--deterministic", "train", "--arch", "pix2pixhd", "--data", P(data), "--out", "@", "--stages",
        "global-only,joint", "--epochs", "1"}},
      {"forge",
       {"--deterministic", "forge", "--ckpt", P(ckpt), "--map", P(map), "--tampered", P(work / "tampered.png"),
        "--image", P(image), "--out", "@"}},
      {"detect", {"detect", "--ckpt", P(det), "--image", P(image), "--stride", "4", "--out", "@/heatmap.png"}},
      {"train-detector",
       {"--seed", "2", "--deterministic", "train-detector", "--out", "@", "--synthetic-task", "30", "--patch", "16",
        "--epochs", "1", "--mode", "adversarial"}},
      {"evaluate",
       {"evaluate", "--pristine", P(work / "pristine"), "--generated", P(work / "generated"), "--out", "@/r.json",
        "--patch", "16", "--stride", "16"}},
      {"bench-robustness", {"--config", P(work / "bench.json"), "--seed", "2", "bench-robustness", "--out", "@"}},
  };
  int identical = 0;
  for (const auto& cmd : commands) {
    std::vector<std::string> stdout_text(2);
    std::vector<std::map<std::string, std::string>> files(2);
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      const auto out = work / "runs" / (std::to_string(identical) + cmd.name + std::to_string(rep));
      auto args = cmd.args;
      for (auto& a : args) {
        if (const auto p = a.find('@'); p != std::string::npos) a.replace(p, 1, P(out));
      }
      ok = ok && run(args, &stdout_text[rep]) == 0;
      for (std::size_t p; (p = stdout_text[rep].find(P(out))) != std::string::npos;) {
        stdout_text[rep].replace(p, P(out).size(), "OUT");
      }
      files[rep] = tree(out);
    }
    c.expect(ok, cmd.name + " exited non-zero");
    c.expect(stdout_text[0] == stdout_text[1], cmd.name + " stdout differs between runs");
    c.expect(!files[0].empty() && files[0] == files[1], cmd.name + " output files differ between runs");
    identical += ok && stdout_text[0] == stdout_text[1] && files[0] == files[1];
  }
  c.note(std::to_string(identical) + "/" + std::to_string(commands.size()) +
         " subcommands byte-identical (serve excluded: long-running)");
}

}  // namespace

int main() {
  set_log_level(LogLevel::error);
  torch::set_num_threads(1);
  criterion("loss-oracles", loss_oracles);
  criterion("gradient-checks", gradient_checks);
  criterion("patch-arithmetic", patch_arithmetic);
  criterion("blending-invariant", blending_invariant);
  criterion("toy-memorization", toy_memorization);
  criterion("metric-oracles", metric_oracles);
  criterion("heatmap-parity", heatmap_parity);
  criterion("robustness-ordering", robustness_ordering);
  criterion("cli-determinism", cli_determinism);
  std::printf("%s\n", g_all_passed ? "ALL PASS" : "SOME CRITERIA FAILED");
  return g_all_passed ? 0 : 1;
}
