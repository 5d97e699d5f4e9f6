#include "trussseg/config.hpp"
#include "trussseg/error.hpp"
#include "trussseg/eval.hpp"
#include "trussseg/io.hpp"
#include "trussseg/segment.hpp"
#include "trussseg/synth.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace trussseg;

namespace {

using PointArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_points(const PointArray& a)
{
  if (a.ndim() != 2 || a.shape(1) != 3)
    throw py::value_error("points must have shape (n, 3)");
  const auto v = a.unchecked<2>();
  std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    out[static_cast<std::size_t>(i)] = Vec3(v(i, 0), v(i, 1), v(i, 2));
  return out;
}

PointArray from_points(const std::vector<Vec3>& pts)
{
  PointArray a({ static_cast<py::ssize_t>(pts.size()), py::ssize_t{ 3 } });
  auto v = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int k = 0; k < 3; ++k)
      v(static_cast<py::ssize_t>(i), k) = pts[i][k];
  return a;
}

template<class T, class A>
std::vector<T> to_vector(const A& a)
{
  if (a.ndim() != 1)
    throw py::value_error("expected a 1-d array");
  return std::vector<T>(a.data(), a.data() + a.size());
}

template<class T>
py::array_t<T> from_vector(const std::vector<T>& v)
{
  py::array_t<T> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

LabeledCloud make_cloud(const PointArray& points, const std::optional<LabelArray>& labels)
{
  LabeledCloud c;
  c.points = to_points(points);
  c.face_label = labels ? to_vector<std::uint32_t>(*labels) : std::vector<std::uint32_t>(c.points.size(), 0);
  if (c.face_label.size() != c.points.size())
    throw Error(ErrorCode::LengthMismatch, "labels and points differ in length");
  return c;
}

RunConfig config_from(const std::string& config, const std::vector<std::string>& overrides)
{
  RunConfig cfg = resolve_config(config);
  for (const auto& o : overrides)
    apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

py::dict metrics_dict(const ConfusionMatrix& cm)
{
  const CloudMetrics m = metrics(cm);
  auto opt = [](const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::object(py::none()); };
  py::dict d;
  d["tp"] = cm.tp;
  d["fp"] = cm.fp;
  d["tn"] = cm.tn;
  d["fn"] = cm.fn;
  d["precision"] = opt(m.precision);
  d["recall"] = opt(m.recall);
  d["f1"] = opt(m.f1);
  d["iou"] = opt(m.iou);
  d["two_class_miou"] = opt(m.two_class_miou);
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Truss segmentation for LiDAR scans: synthesis, segmentation and evaluation.";

  // owned by the module; the handle outlives every translator call
  static PyObject* error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.def("presets", &preset_names, "Names of the built-in configurations.");
  m.def("modes", [] {
    std::vector<std::string> names;
    for (const auto& mode : all_modes())
      names.emplace_back(mode.name);
    return names;
  });
  m.def("config_text", [](const std::string& config, const std::vector<std::string>& overrides) {
    return serialize_config(config_from(config, overrides));
  }, py::arg("config") = "ortho", py::arg("overrides") = std::vector<std::string>{});

  m.def(
    "simulate_scan",
    [](const std::string& config, std::size_t index, std::optional<std::uint64_t> seed, const std::vector<std::string>& overrides) {
      RunConfig cfg = config_from(config, overrides);
      if (seed)
        cfg.dataset.seed = *seed;
      const DatasetSpec spec = cfg.dataset_spec();
      LabeledCloud cloud;
      {
        py::gil_scoped_release release;
        const Scene scene = build_scene(spec.scene);
        cloud = simulate_scan(spec, scene, index);
      }
      return py::make_tuple(from_points(cloud.points), from_vector(cloud.face_label));
    },
    py::arg("config") = "ortho", py::arg("index") = 0, py::arg("seed") = py::none(),
    py::arg("overrides") = std::vector<std::string>{},
    "Scan `index` of the dataset a configuration describes, as (points, labels) in the sensor frame.");

  m.def(
    "segment",
    [](const PointArray& points, const std::string& mode, const std::vector<std::string>& overrides, unsigned jobs) {
      RunConfig cfg = config_from("ortho", overrides);
      apply_mode(mode, cfg.pipeline);
      cfg.pipeline.jobs = jobs;
      const LabeledCloud cloud = make_cloud(points, std::nullopt);
      SegmentationOutput out;
      {
        py::gil_scoped_release release;
        out = run_pipeline(cloud, cfg.pipeline);
      }
      py::dict d;
      d["prediction"] = from_vector(out.prediction);
      d["coarse_ground"] = from_vector(out.coarse_ground);
      d["density_removed"] = from_vector(out.density_removed);
      d["clusters"] = out.clusters.size();
      d["warnings"] = out.warnings;
      d["total_ms"] = out.latency.total_ms;
      if (out.plane)
        d["plane"] = py::make_tuple(out.plane->normal.x(), out.plane->normal.y(), out.plane->normal.z(), out.plane->offset);
      else
        d["plane"] = py::none();
      return d;
    },
    py::arg("points"), py::arg("mode") = "H", py::arg("overrides") = std::vector<std::string>{}, py::arg("jobs") = 1,
    "Run the pipeline; returns a dict with the 0/1 `prediction` array and stage details.");

  m.def(
    "evaluate",
    [](const MaskArray& prediction, const MaskArray& truth) {
      return metrics_dict(confusion(to_vector<std::uint8_t>(prediction), to_vector<std::uint8_t>(truth)));
    },
    py::arg("prediction"), py::arg("truth"));

  m.def(
    "select_threshold",
    [](const py::array_t<double, py::array::c_style | py::array::forcecast>& scores, const MaskArray& truth,
       const std::string& method) {
      const auto s = to_vector<double>(scores);
      const auto t = to_vector<std::uint8_t>(truth);
      if (method != "roc" && method != "pr")
        throw py::value_error("method must be 'roc' or 'pr'");
      const ThresholdSelection sel = method == "roc" ? select_threshold_roc(s, t) : select_threshold_pr(s, t);
      py::dict d;
      d["threshold"] = sel.threshold;
      d["gmean"] = sel.best.gmean;
      d["f1"] = sel.best.f1;
      d["tpr"] = sel.best.tpr;
      d["fpr"] = sel.best.fpr;
      d["candidates"] = sel.curve.size();
      return d;
    },
    py::arg("scores"), py::arg("truth"), py::arg("method") = "roc");

  m.def(
    "estimate_normals",
    [](const PointArray& points, int k) {
      const NormalEstimate est = estimate_normals(to_points(points), k);
      return py::make_tuple(from_points(est.normals), from_vector(est.curvature));
    },
    py::arg("points"), py::arg("k") = 30, "PCA normals facing the origin and surface curvature.");

  m.def("read_pcd", [](const std::string& path) {
    const LabeledCloud c = read_pcd(path);
    return py::make_tuple(from_points(c.points), from_vector(c.face_label));
  }, py::arg("path"));

  m.def(
    "write_pcd",
    [](const std::string& path, const PointArray& points, const std::optional<LabelArray>& labels, bool binary) {
      write_pcd(make_cloud(points, labels), path, binary ? PcdMode::Binary : PcdMode::Ascii);
    },
    py::arg("path"), py::arg("points"), py::arg("labels") = py::none(), py::arg("binary") = true);
}
