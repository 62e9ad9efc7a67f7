#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "skytomo/inverse.hpp"
#include "skytomo/optics.hpp"
#include "skytomo/oracle.hpp"
#include "skytomo/parallel.hpp"
#include "skytomo/presets.hpp"
#include "skytomo/rng.hpp"
#include "skytomo/scene.hpp"
#include "skytomo/sensor.hpp"
#include "skytomo/transport.hpp"
#include "skytomo/vfmc.hpp"

namespace py = pybind11;
using namespace skytomo;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Image& img) {
  Array out({img.height, img.width});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

Image from_array(const Array& a) {
  if (a.ndim() != 2) throw ValidationError("image", "expected a 2-D array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

Array volume_array(const VoxelGrid& g, const std::vector<double>& v) {
  // Storage is x-fastest, so the natural array shape is (nz, ny, nx).
  Array out({g.nz(), g.ny(), g.nx()});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> volume_vector(const VoxelGrid& g, const Array& a) {
  if (static_cast<std::size_t>(a.size()) != g.size()) {
    throw ValidationError("volume", "size does not match the grid");
  }
  return {a.data(), a.data() + a.size()};
}

TransportOptions transport(int threads) {
  TransportOptions o;
  o.threads = threads;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Monte Carlo rendering and scattering tomography of aerosol fields";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.def("phase_hg", &phase_hg, py::arg("mu"), py::arg("g"));
  m.def("phase_rayleigh", &phase_rayleigh, py::arg("mu"));
  m.def("hg_cos_from_uniform", &hg_cos_from_uniform, py::arg("g"), py::arg("u"));
  m.def("rayleigh_cos_from_uniform", &rayleigh_cos_from_uniform, py::arg("u"));

  py::class_<Camera>(m, "Camera")
      .def(py::init([](std::array<double, 3> p, int w, int h) { return Camera(Vec3(p[0], p[1], p[2]), w, h); }),
           py::arg("position"), py::arg("width"), py::arg("height"))
      .def_property_readonly("position", [](const Camera& c) {
        return std::array<double, 3>{c.position().x(), c.position().y(), c.position().z()};
      })
      .def_property_readonly("width", &Camera::width)
      .def_property_readonly("height", &Camera::height)
      .def("valid_mask", [](const Camera& c) {
        py::array_t<bool> out({c.height(), c.width()});
        for (int p = 0; p < c.num_pixels(); ++p) out.mutable_data()[p] = c.valid(p);
        return out;
      });

  py::class_<Scene>(m, "Scene")
      .def_property_readonly("shape", [](const Scene& s) {
        return std::array<int, 3>{s.grid.nx(), s.grid.ny(), s.grid.nz()};
      })
      .def_property_readonly("voxel_size", [](const Scene& s) {
        const Vec3 d = s.grid.voxel_dims();
        return std::array<double, 3>{d.x(), d.y(), d.z()};
      })
      .def_property_readonly("cameras", [](const Scene& s) { return s.cameras; })
      .def_property("sun_zenith_deg", [](const Scene& s) { return s.sun.zenith_deg; },
                    [](Scene& s, double v) { s.sun.zenith_deg = v; })
      .def_property("sun_azimuth_deg", [](const Scene& s) { return s.sun.azimuth_deg; },
                    [](Scene& s, double v) { s.sun.azimuth_deg = v; })
      .def_property_readonly("aerosol_g", [](const Scene& s) { return s.medium.aerosol.g; })
      .def_property_readonly("aerosol_albedo", [](const Scene& s) { return s.medium.aerosol.albedo; })
      .def_property(
          "beta_aerosol",
          [](const Scene& s) { return volume_array(s.grid, s.medium.beta_aerosol_green); },
          [](Scene& s, const Array& a) { s.medium.beta_aerosol_green = volume_vector(s.grid, a); },
          "Green-channel aerosol extinction, 1/m, shape (nz, ny, nx)")
      .def("beta_air", [](const Scene& s, int ch) {
        if (ch < 0 || ch >= kNumChannels) throw ValidationError("channel", "out of range");
        return volume_array(s.grid, s.medium.beta_air[ch]);
      }, py::arg("channel"))
      .def("select_cameras", [](const Scene& s, const std::vector<std::size_t>& idx) {
        Scene out = s;
        out.cameras.clear();
        for (std::size_t i : idx) out.cameras.push_back(s.cameras.at(i));
        return out;
      }, py::arg("indices"))
      .def("validate", &Scene::validate)
      .def("save", [](const Scene& s, const std::filesystem::path& p) { save_scene(s, p); }, py::arg("path"));

  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("preset_names", &preset_names);
  m.def("make_preset", [](const std::string& name, std::array<int, 3> grid, int pixels, bool paper_scale) {
    return make_preset(name, {.nx = grid[0], .ny = grid[1], .nz = grid[2], .pixels = pixels,
                              .paper_scale = paper_scale});
  }, py::arg("name"), py::arg("grid") = std::array<int, 3>{24, 24, 24}, py::arg("pixels") = 32,
     py::arg("paper_scale") = false);

  m.def("render_vfmc", [](const Scene& s, int channel, std::uint64_t photons, std::uint64_t seed,
                          int n_rays, int threads) {
    std::vector<ProjectionMatrix> proj;
    {
      py::gil_scoped_release release;
      proj.resize(s.cameras.size());
      parallel_for(proj.size(), resolve_threads(threads),
                   [&](std::size_t c) { proj[c] = build_projection(s, c, n_rays); });
    }
    VfmcResult r;
    {
      py::gil_scoped_release release;
      r = render_vfmc(s, channel, photons, seed, proj, transport(threads));
    }
    py::list out;
    for (const Image& img : r.images) out.append(to_array(img));
    return out;
  }, py::arg("scene"), py::arg("channel"), py::arg("photons"), py::arg("seed") = 1,
     py::arg("n_rays") = 10, py::arg("threads") = 0);

  m.def("render_fmc", [](const Scene& s, int channel, std::uint64_t photons, std::uint64_t seed, int threads) {
    FmcResult r;
    {
      py::gil_scoped_release release;
      r = trace_fmc(s, channel, photons, {}, seed, transport(threads));
    }
    py::list out;
    for (const Image& img : r.images) out.append(to_array(img));
    return out;
  }, py::arg("scene"), py::arg("channel"), py::arg("photons"), py::arg("seed") = 1, py::arg("threads") = 0);

  m.def("render_bmc", [](const Scene& s, int channel, std::size_t camera, std::uint64_t per_pixel,
                         std::uint64_t seed, int threads) {
    BmcImage r;
    {
      py::gil_scoped_release release;
      r = render_bmc(s, channel, camera, per_pixel, seed, transport(threads));
    }
    return py::make_tuple(to_array(r.mean), to_array(r.std_error));
  }, py::arg("scene"), py::arg("channel"), py::arg("camera"), py::arg("per_pixel"), py::arg("seed") = 1,
     py::arg("threads") = 0, "Returns (mean, standard error) images.");

  m.def("render_single_scatter", [](const Scene& s, int channel, std::size_t camera, int subsamples) {
    return to_array(render_single_scatter(s, channel, camera, {.subsamples = subsamples}));
  }, py::arg("scene"), py::arg("channel"), py::arg("camera"), py::arg("subsamples") = 4);

  m.def("sun_mask", [](const Scene& s, std::size_t camera, double radius_deg) {
    const Camera& cam = s.cameras.at(camera);
    const PixelMask mask = build_sun_mask(cam, s.sun, radius_deg);
    py::array_t<bool> out({cam.height(), cam.width()});
    std::copy(mask.begin(), mask.end(), out.mutable_data());
    return out;
  }, py::arg("scene"), py::arg("camera"), py::arg("radius_deg") = 15.0);

  m.def("fit_scale", [](const Array& a, const Array& b, py::array_t<bool> mask) {
    const Image ia = from_array(a);
    const Image ib = from_array(b);
    if (mask.size() != a.size()) throw ValidationError("mask", "size does not match the images");
    PixelMask mk(mask.data(), mask.data() + mask.size());
    return fit_scale(ia, ib, mk);
  }, py::arg("a"), py::arg("b"), py::arg("mask"), "s minimizing ||a - s b||^2 over the mask.");

  m.def("error_metrics", [](const Array& estimate, const Array& truth) {
    const std::vector<double> e(estimate.data(), estimate.data() + estimate.size());
    const std::vector<double> t(truth.data(), truth.data() + truth.size());
    const ErrorMetrics r = error_metrics(e, t);
    return py::dict(py::arg("delta_mass") = r.delta_mass, py::arg("epsilon") = r.epsilon);
  }, py::arg("estimate"), py::arg("truth"));

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("label"));
}
