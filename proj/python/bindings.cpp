#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "patrec/dataset_io.hpp"
#include "patrec/gamma.hpp"
#include "patrec/kspace.hpp"
#include "patrec/layers.hpp"
#include "patrec/nets.hpp"
#include "patrec/phantom.hpp"
#include "patrec/trainer.hpp"

namespace py = pybind11;
using namespace patrec;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Field to_field(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  Field f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + f.size(), f.v.begin());
  return f;
}

py::array_t<double> from_field(const Field& f) {
  py::array_t<double> out({f.rows, f.cols});
  std::copy(f.v.begin(), f.v.end(), out.mutable_data());
  return out;
}

py::array_t<double> from_fields(const std::vector<Field>& fs) {
  if (fs.empty()) return py::array_t<double>(std::vector<py::ssize_t>{0, 0, 0});
  py::array_t<double> out({static_cast<int>(fs.size()), fs[0].rows, fs[0].cols});
  double* p = out.mutable_data();
  for (const auto& f : fs) p = std::copy(f.v.begin(), f.v.end(), p);
  return out;
}

diff::Tensor<double> to_tensor2d(const Array& a) {
  auto t = diff::Tensor<double>::zeros(
      {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))});
  std::copy(a.data(), a.data() + t.numel(), t.value().begin());
  return t;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "k-space photoacoustic simulator, phantom generator and "
            "constrained mapping/reconstruction networks";

  py::class_<phantom::Ellipse>(m, "Ellipse")
      .def(py::init([](double sx, double sy, double cx, double cy, double angle,
                       double intensity) {
             return phantom::Ellipse{sx, sy, cx, cy, angle, intensity};
           }),
           py::arg("semi_x"), py::arg("semi_y"), py::arg("center_x"),
           py::arg("center_y"), py::arg("angle"), py::arg("intensity"))
      .def_readwrite("semi_x", &phantom::Ellipse::semi_x)
      .def_readwrite("semi_y", &phantom::Ellipse::semi_y)
      .def_readwrite("center_x", &phantom::Ellipse::center_x)
      .def_readwrite("center_y", &phantom::Ellipse::center_y)
      .def_readwrite("angle", &phantom::Ellipse::angle)
      .def_readwrite("intensity", &phantom::Ellipse::intensity)
      .def("__repr__", [](const phantom::Ellipse& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "Ellipse(%.4g, %.4g, center=(%.4g, %.4g), angle=%.4g, I=%.4g)",
                      e.semi_x, e.semi_y, e.center_x, e.center_y, e.angle, e.intensity);
        return std::string(buf);
      });

  m.def("shepp_logan", &phantom::shepp_logan, "canonical 10-ellipse head phantom");
  m.def(
      "rasterize",
      [](const std::vector<phantom::Ellipse>& es, int m) {
        return from_field(phantom::rasterize(es, m));
      },
      py::arg("ellipses"), py::arg("m"), "sum-of-intensities raster clamped to [0,1]");
  m.def(
      "sample_phantom",
      [](std::uint64_t seed, double jitter) {
        Rng rng(seed);
        return phantom::sample_phantom(rng, jitter);
      },
      py::arg("seed"), py::arg("jitter") = 0.05);
  m.def(
      "build_dataset",
      [](std::uint64_t seed, int m, int n_train, int n_val, int n_test, double jitter) {
        auto ds = phantom::build_dataset(seed, m, n_train, n_val, n_test, jitter);
        py::dict out;
        out["train"] = from_fields(ds.train);
        out["validation"] = from_fields(ds.validation);
        out["test"] = from_fields(ds.test);
        return out;
      },
      py::arg("seed"), py::arg("m"), py::arg("n_train"), py::arg("n_val"),
      py::arg("n_test"), py::arg("jitter") = 0.05);

  m.def(
      "wavenumbers",
      [](int m, int pad) {
        return from_field(kspace::wavenumber_magnitudes(kspace::SimGrid::make(m, pad)));
      },
      py::arg("m"), py::arg("pad") = 2, "|k| on the padded FFT grid");

  m.def("gamma_ground_truth",
        [](int case_index, double v) {
          return gamma_ground_truth(static_cast<GammaCase>(case_index), v);
        },
        py::arg("case_index"), py::arg("v"), "closed-form speed law, cases 1-4");

  py::class_<kspace::Simulator>(m, "Simulator")
      .def(py::init([](int m, int pad, double c_max, double cfl, double t_min, int n_det) {
             auto grid = kspace::SimGrid::make(m, pad);
             auto cfg = kspace::SimConfig::make(grid, c_max, cfl, t_min, n_det);
             return kspace::Simulator(grid, cfg);
           }),
           py::arg("m"), py::arg("pad") = 2, py::arg("c_max") = 1.0,
           py::arg("cfl") = 0.3, py::arg("t_min") = 2.5, py::arg("n_det") = 0)
      .def_property_readonly("dt", [](const kspace::Simulator& s) { return s.config().dt; })
      .def_property_readonly("n_steps",
                             [](const kspace::Simulator& s) { return s.config().n_steps; })
      .def_property_readonly(
          "record_stride",
          [](const kspace::Simulator& s) { return s.config().record_stride; })
      .def_property_readonly("n_det",
                             [](const kspace::Simulator& s) { return s.config().n_det; })
      .def_property_readonly("t_final",
                             [](const kspace::Simulator& s) { return s.config().t_final; })
      .def_property_readonly("M", [](const kspace::Simulator& s) { return s.grid().M; })
      .def(
          "simulate",
          [](const kspace::Simulator& s, const Array& f, const Array& speed_sq) {
            return from_field(s.simulate(to_field(f), to_field(speed_sq)));
          },
          py::arg("f"), py::arg("speed_sq"),
          "boundary record (n_det x n_time) for an interior phantom and a full "
          "squared-speed field")
      .def(
          "simulate_vjp",
          [](const kspace::Simulator& s, const Array& f, const Array& speed_sq,
             const Array& cotangent) {
            kspace::Simulator::Recording rec;
            s.simulate(to_field(f), to_field(speed_sq), &rec);
            auto [gf, gc] = s.simulate_vjp(rec, to_field(cotangent));
            return py::make_tuple(from_field(gf), from_field(gc));
          },
          py::arg("f"), py::arg("speed_sq"), py::arg("cotangent"),
          "gradients of sum(cotangent * simulate(f, speed_sq)) wrt both inputs")
      .def(
          "true_speed_field",
          [](const kspace::Simulator& s, const Array& f, int case_index) {
            return from_field(
                io::true_speed_field(to_field(f), static_cast<GammaCase>(case_index), s));
          },
          py::arg("f"), py::arg("case_index"),
          "gamma(f) on the padded grid with the ambient value outside");

  py::class_<models::MappingNet<double>>(m, "MappingNet")
      .def(py::init([](double c0, double c1, std::uint64_t seed) {
             Rng rng(seed);
             return models::MappingNet<double>(c0, c1, rng);
           }),
           py::arg("c0") = 0.7, py::arg("c1") = 1.0, py::arg("seed") = 0)
      .def("__call__",
           [](const models::MappingNet<double>& net, const Array& v) {
             auto out = net.forward(to_tensor2d(v));
             py::array_t<double> res({v.shape(0), v.shape(1)});
             std::copy(out.value().begin(), out.value().end(), res.mutable_data());
             return res;
           })
      .def("eval", &models::MappingNet<double>::eval, py::arg("v"));

  py::class_<models::ReconstructionNet<double>>(m, "ReconstructionNet")
      .def(py::init([](int m, const std::string& variant, int levels, int base_channels,
                       std::uint64_t seed) {
             Rng rng(seed);
             return models::ReconstructionNet<double>(
                 m, models::recon_variant_from_string(variant),
                 models::UNetConfig{levels, base_channels}, rng);
           }),
           py::arg("m"), py::arg("variant") = "dense", py::arg("levels") = 3,
           py::arg("base_channels") = 32, py::arg("seed") = 0)
      .def("__call__",
           [](const models::ReconstructionNet<double>& net, const Array& g) {
             auto out = net.forward(to_tensor2d(g));
             py::array_t<double> res({g.shape(0), g.shape(1)});
             std::copy(out.value().begin(), out.value().end(), res.mutable_data());
             return res;
           })
      .def_property_readonly("n_linear_params",
                             [](const models::ReconstructionNet<double>& net) {
                               std::int64_t n = 0;
                               for (const auto& p : net.linear_params()) n += p.numel();
                               return n;
                             });

  m.def(
      "pixel_unshuffle",
      [](const Array& x) {
        auto out = diff::pixel_unshuffle(to_tensor2d(x));
        py::array_t<double> res({4, out.dim(1), out.dim(2)});
        std::copy(out.value().begin(), out.value().end(), res.mutable_data());
        return res;
      },
      py::arg("x"), "split into the four parity sub-images");
  m.def(
      "pixel_shuffle",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
        if (x.ndim() != 3 || x.shape(0) != 4)
          throw std::invalid_argument("expected a (4, h, w) array");
        auto t = diff::Tensor<double>::zeros({4, static_cast<int>(x.shape(1)),
                                              static_cast<int>(x.shape(2))});
        std::copy(x.data(), x.data() + t.numel(), t.value().begin());
        auto out = diff::pixel_shuffle(t);
        py::array_t<double> res({out.dim(0), out.dim(1)});
        std::copy(out.value().begin(), out.value().end(), res.mutable_data());
        return res;
      },
      py::arg("x"), "inverse of pixel_unshuffle");

  m.attr("__version__") = "0.1.0";
}
