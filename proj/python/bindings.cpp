#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "semaforge/cli.hpp"
#include "semaforge/data.hpp"
#include "semaforge/error.hpp"
#include "semaforge/forensics/auc.hpp"
#include "semaforge/manipulation.hpp"
#include "semaforge/metrics.hpp"

namespace py = pybind11;
using namespace semaforge;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// HxW or HxWxC float arrays in [0, 1].
Image to_image(const FloatArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected an HxW or HxWxC array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(h, w, c);
  std::copy(a.data(), a.data() + a.size(), img.pixels().begin());
  return img;
}

FloatArray from_image(const Image& img) {
  FloatArray a({img.height(), img.width(), img.channels()});
  std::copy(img.pixels().begin(), img.pixels().end(), a.mutable_data());
  return a;
}

BinaryMask to_mask(const MaskArray& a) {
  if (a.ndim() != 2) throw ShapeError("mask must be HxW");
  BinaryMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  const auto* p = a.data();
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) m.at(y, x) = p[static_cast<std::size_t>(y) * m.width() + x] != 0;
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "semaforge native core";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return metrics::ssim(to_image(a), to_image(b)); },
        py::arg("a"), py::arg("b"));
  m.def("fid", &metrics::fid, py::arg("a"), py::arg("b"), "Frechet distance between feature matrices (rows = samples).");
  m.def("kid", &metrics::kid, py::arg("a"), py::arg("b"));

  m.def(
      "window_origins",
      [](int h, int w, int tile, int stride) {
        std::vector<std::pair<int, int>> out;
        for (auto o : window_origins(h, w, tile, stride)) out.emplace_back(o.y, o.x);
        return out;
      },
      py::arg("height"), py::arg("width"), py::arg("tile"), py::arg("stride"));

  m.def(
      "feather_alpha",
      [](const MaskArray& mask, int radius) {
        const auto mk = to_mask(mask);
        const auto alpha = manip::feather_alpha(mk, radius);
        py::array_t<float> a({mk.height(), mk.width()});
        std::copy(alpha.begin(), alpha.end(), a.mutable_data());
        return a;
      },
      py::arg("mask"), py::arg("radius"));

  m.def(
      "blend",
      [](const FloatArray& pristine, const FloatArray& generated, const MaskArray& mask, int feather) {
        return from_image(manip::blend(to_image(pristine), to_image(generated), {to_mask(mask), feather, 0}));
      },
      py::arg("pristine"), py::arg("generated"), py::arg("mask"), py::arg("feather_radius") = 3);

  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return forensics::roc_auc(scores, labels);
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line; returns (exit_code, stdout, stderr).");
}
