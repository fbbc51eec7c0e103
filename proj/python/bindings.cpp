#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "debulk/io.hpp"
#include "debulk/pipeline.hpp"
#include "debulk/postprocess.hpp"
#include "debulk/synth.hpp"
#include "debulk/wrinkle2d.hpp"

namespace py = pybind11;
using namespace debulk;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Flags = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// Grids go out as (rows, cols) arrays, matching image layout.
Array grid_array(const Grid<double>& g) {
  Array a({g.rows(), g.cols()});
  std::copy(g.data().begin(), g.data().end(), a.mutable_data());
  return a;
}

Flags mask_array(const Mask& m) {
  Flags a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

OrganizedPointCloud cloud_from(const Array& points, const Flags& valid) {
  if (points.ndim() != 3 || points.shape(2) != 3) throw Error("points must have shape (rows, cols, 3)");
  const auto h = static_cast<std::size_t>(points.shape(0)), w = static_cast<std::size_t>(points.shape(1));
  if (valid.ndim() != 2 || static_cast<std::size_t>(valid.shape(0)) != h || static_cast<std::size_t>(valid.shape(1)) != w)
    throw Error("valid must have shape (rows, cols)");
  OrganizedPointCloud c(w, h);
  const double* p = points.data();
  for (std::size_t i = 0; i < w * h; ++i) {
    c.points[i] = Vec3(p[3 * i], p[3 * i + 1], p[3 * i + 2]);
    c.valid[i] = valid.data()[i] ? 1 : 0;
  }
  return c;
}

py::tuple cloud_arrays(const OrganizedPointCloud& c) {
  Array pts({c.height, c.width, std::size_t{3}});
  double* p = pts.mutable_data();
  for (std::size_t i = 0; i < c.points.size(); ++i)
    for (int d = 0; d < 3; ++d) p[3 * i + static_cast<std::size_t>(d)] = c.points[i][d];
  Flags v({c.height, c.width});
  std::copy(c.valid.begin(), c.valid.end(), v.mutable_data());
  return py::make_tuple(pts, v);
}

HeightMap heightmap_from(const Vec2& origin, const Vec2& spacing, const Array& values, const Flags& valid) {
  if (values.ndim() != 2) throw Error("values must be 2D");
  const auto rows = static_cast<std::size_t>(values.shape(0)), cols = static_cast<std::size_t>(values.shape(1));
  HeightMap hm(origin, spacing, cols, rows);
  std::copy(values.data(), values.data() + rows * cols, hm.values.data().begin());
  std::copy(valid.data(), valid.data() + rows * cols, hm.valid.data().begin());
  hm.check();
  return hm;
}

PipelineConfig config_from(const std::string& json) {
  PipelineConfig cfg;
  if (!json.empty()) from_json(Json::parse(json), cfg);
  cfg.derive();
  cfg.check();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_debulk, m) {
  m.doc() = "Wrinkle prediction for debulked prepreg plies";
  py::register_exception<Error>(m, "DebulkError", PyExc_ValueError);

  py::class_<HeightMap>(m, "HeightMap")
      .def(py::init(&heightmap_from), py::arg("origin"), py::arg("spacing"), py::arg("values"), py::arg("valid"))
      .def_property_readonly("origin", [](const HeightMap& h) { return h.origin; })
      .def_property_readonly("spacing", [](const HeightMap& h) { return h.spacing; })
      .def_property_readonly("values", [](const HeightMap& h) { return grid_array(h.values); })
      .def_property_readonly("valid", [](const HeightMap& h) { return mask_array(h.valid); })
      .def_property_readonly("shape", [](const HeightMap& h) { return py::make_tuple(h.rows(), h.cols()); })
      .def("__eq__", [](const HeightMap& a, const HeightMap& b) { return a == b; });

  py::class_<ReferenceSurface>(m, "ReferenceSurface")
      .def_static("flat", &ReferenceSurface::flat, py::arg("lo"), py::arg("hi"), py::arg("spacing"), py::arg("z") = 0.0)
      .def_static("from_heightmap", &ReferenceSurface::from_heightmap)
      .def("as_heightmap", &ReferenceSurface::as_heightmap)
      .def("eval", &ReferenceSurface::eval, py::arg("x"), py::arg("y"))
      .def("sample", [](const ReferenceSurface& r, double x, double y) {
        const auto s = r.sample(x, y);
        return py::make_tuple(s.z, s.dzdx, s.dzdy);
      });

  m.def("ridge_height", &ridge_height, py::arg("L_ply"), py::arg("L_mold"), py::arg("t"));
  m.def("cosine_bell_arc_length", &cosine_bell_arc_length, py::arg("peak"), py::arg("radius"));

  m.def("_default_config", [] {
    PipelineConfig c;
    c.derive();
    return Json(c).dump();
  });
  m.def("_layup_suite", [] { return Json(layup_suite()).dump(); });

  m.def(
      "_generate",
      [](const std::string& spec_json, std::uint64_t seed, bool debulked) {
        SceneSpec spec;
        from_json(Json::parse(spec_json), spec);
        const Scene s = debulked ? generate_debulked(spec, MaterialParams{}, seed) : generate(spec, seed);
        Json truth = Json::array();
        for (const auto& t : s.truth)
          truth.push_back({{"center", vec2_json(t.center)}, {"peak_mm", t.peak_mm}, {"area_cm2", t.area_cm2},
                           {"excess_mm", t.excess_mm}});
        py::tuple cloud = cloud_arrays(s.ply);
        return py::make_tuple(cloud[0], cloud[1], s.ref, truth.dump());
      },
      py::arg("spec"), py::arg("seed"), py::arg("debulked") = false);

  m.def(
      "_predict",
      [](const Array& points, const Flags& valid, const ReferenceSurface& ref, const std::string& config) {
        const PipelineConfig cfg = config_from(config);
        const OrganizedPointCloud cloud = cloud_from(points, valid);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run(cloud, ref, cfg);
        }
        py::list fields;
        for (const auto& rep : r.reports) fields.append(rep.heightfield);
        return py::make_tuple(summary_json(r, cfg).dump(), fields, static_cast<int>(r.status()));
      },
      py::arg("points"), py::arg("valid"), py::arg("reference"), py::arg("config") = "");

  m.def(
      "_heightmap",
      [](const Array& points, const Flags& valid, const ReferenceSurface& ref, const std::string& config) {
        return prepare_heightmap(cloud_from(points, valid), ref, config_from(config).prep);
      },
      py::arg("points"), py::arg("valid"), py::arg("reference"), py::arg("config") = "");

  m.def(
      "_wrinkle2d",
      [](int segments, double apex, double leg, int steps) {
        const Ply2D ply = Ply2D::triangle(leg, apex, segments);
        Wrinkle2DResult r;
        {
          py::gil_scoped_release release;
          r = simulate_2d(ply, MaterialParams{}, steps);
        }
        const auto& nodes = r.final_nodes();
        Array xy({nodes.size(), std::size_t{2}});
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          xy.mutable_data()[2 * i] = nodes[i].x();
          xy.mutable_data()[2 * i + 1] = nodes[i].y();
        }
        return py::make_tuple(r.apex_height(ply.mold), ply.length(), chain_length(nodes), r.converged, xy);
      },
      py::arg("segments"), py::arg("apex"), py::arg("leg"), py::arg("steps"));

  m.def("read_heightmap", py::overload_cast<const std::string&>(&read_heightmap), py::arg("path"));
  m.def("write_heightmap", py::overload_cast<const std::string&, const HeightMap&>(&write_heightmap), py::arg("path"),
        py::arg("heightmap"));
}
