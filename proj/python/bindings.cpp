#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "lfsep/cli.hpp"
#include "lfsep/experiment.hpp"
#include "lfsep/io.hpp"
#include "lfsep/operators.hpp"
#include "lfsep/recon.hpp"
#include "lfsep/textures.hpp"

namespace py = pybind11;
using namespace lfsep;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.data());
  return img;
}

Array to_array(const Image& img) {
  Array a({img.rows(), img.cols()});
  std::copy(img.begin(), img.end(), a.mutable_data());
  return a;
}

py::tuple extent(Extent e) { return py::make_tuple(e.height, e.width); }

}  // namespace

PYBIND11_MODULE(_lfsep, m) {
  m.doc() = "Reflection separation with a simulated light-field camera";

  py::class_<CameraConfig>(m, "CameraConfig")
      .def_property_readonly("sensor_size", [](const CameraConfig& c) { return extent(c.sensor_size); })
      .def_property_readonly("unit_cell", [](const CameraConfig& c) { return extent(c.unit_cell); })
      .def_property_readonly("texture_size", [](const CameraConfig& c) { return extent(c.texture_size()); })
      .def_property_readonly("focal_conjugate_depth", &CameraConfig::focal_conjugate_depth)
      .def("blur_diameter", &CameraConfig::blur_diameter, py::arg("depth"))
      .def(
          "with_units", [](const CameraConfig& c, int h, int w) { return c.with_units({h, w}); }, py::arg("height"),
          py::arg("width"))
      .def("to_yaml", &camera_to_yaml);

  m.def(
      "desk_camera", [](int h, int w) { return desk_camera({h, w}); }, py::arg("units_h") = 16, py::arg("units_w") = 16);
  m.def("reference_camera", [] { return reference_camera(); });
  m.def("camera_preset", &camera_preset, py::arg("name"));
  m.def(
      "depth_levels", [](double lo, double hi, int n) { return make_depth_levels(lo, hi, n).depths(); },
      py::arg("near"), py::arg("far"), py::arg("count"));

  py::class_<PsfKernelBank>(m, "PsfKernelBank")
      .def_property_readonly("depth", &PsfKernelBank::depth)
      .def_property_readonly("period", [](const PsfKernelBank& b) { return extent(b.period()); })
      .def("apply", [](const PsfKernelBank& b, const Array& f) { return to_array(apply_psf(b, to_image(f))); })
      .def("adjoint", [](const PsfKernelBank& b, const Array& l) { return to_array(apply_psf_adjoint(b, to_image(l))); });
  m.def("build_psf_bank", &build_psf_bank, py::arg("camera"), py::arg("depth"));

  m.def(
      "simulate_observation",
      [](const Array& t, const Array& r, double d_t, double d_r, const CameraConfig& cfg, double sigma,
         std::uint64_t seed) {
        ObservationOptions o;
        o.noise_sigma = sigma;
        o.seed = seed;
        return to_array(simulate_observation({to_image(t), to_image(r), d_t, d_r}, cfg, o).plane(0));
      },
      py::arg("texture_t"), py::arg("texture_r"), py::arg("depth_t"), py::arg("depth_r"), py::arg("camera"),
      py::arg("noise_sigma") = 0.0, py::arg("seed") = 1);

  m.def(
      "reconstruct_layers",
      [](const Array& obs, const CameraConfig& cfg, double d_t, double d_r, std::optional<double> nu, int max_iters,
         double rel_tol) {
        ReconConfig rc;
        rc.nu = nu;
        rc.max_iters = max_iters;
        rc.rel_tol = rel_tol;
        TextureVolume est;
        {
          py::gil_scoped_release release;
          est = reconstruct_layers(LightFieldImage(cfg, to_image(obs)), build_psf_bank(cfg, d_t),
                                   build_psf_bank(cfg, d_r), rc);
        }
        return py::make_tuple(to_array(est.layer_t), to_array(est.layer_r));
      },
      py::arg("observation"), py::arg("camera"), py::arg("depth_t"), py::arg("depth_r"), py::arg("nu") = py::none(),
      py::arg("max_iters") = ReconConfig{}.max_iters, py::arg("rel_tol") = ReconConfig{}.rel_tol);

  m.def(
      "ncc", [](const Array& e, const Array& t) { return ncc(to_image(e), to_image(t)); }, py::arg("estimate"),
      py::arg("truth"));
  m.def(
      "project_simplex", [](const std::vector<double>& v) { return project_simplex(v); }, py::arg("v"));
  m.def(
      "texture_corpus",
      [](int h, int w, int count, std::uint64_t seed) {
        std::vector<Array> out;
        for (const Image& img : texture_corpus({h, w}, count, seed)) out.push_back(to_array(img));
        return out;
      },
      py::arg("height"), py::arg("width"), py::arg("count"), py::arg("seed"));

  m.def("read_pfm", [](const fs::path& p) {
    std::vector<Array> out;
    for (const Image& img : read_pfm(p)) out.push_back(to_array(img));
    return out;
  });
  m.def("write_pfm", [](const fs::path& p, const Array& a) { write_pfm(p, to_image(a)); });
  m.def(
      "manifest_yaml", [](const fs::path& p) { return manifest_to_yaml(load_manifest(p)); }, py::arg("path"),
      "Fully resolved manifest as YAML.");
  m.def(
      "run_command",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "lfsep");
        py::gil_scoped_release release;
        return run_command(args);
      },
      py::arg("args"), "Runs an lfsep subcommand; returns its exit status.");
}
