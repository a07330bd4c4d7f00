#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ninjacut/experiments.hpp"
#include "ninjacut/io.hpp"

namespace py = pybind11;
using namespace ninjacut;

namespace {

CoreFamily family_of(const std::string& name) { return core_family_from_string(name); }

py::array_t<double> contour_array(const CoreShape& c) {
  py::array_t<double> a({static_cast<py::ssize_t>(c.contour.size()), py::ssize_t{2}});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t k = 0; k < c.contour.size(); ++k) {
    m(k, 0) = c.contour[k].x();
    m(k, 1) = c.contour[k].y();
  }
  return a;
}

template <class T>
py::array_t<T> window_array(const GridSpec& g, const std::vector<T>& v) {
  py::array_t<T> a({static_cast<py::ssize_t>(g.ny), static_cast<py::ssize_t>(g.nx)});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

/// Episode config from the strict run-config JSON (the Python side passes a JSON string).
EpisodeConfig episode_config_of(const std::string& run_config_json, const std::string& variant) {
  const RunConfig rc = run_config_from_json(nlohmann::json::parse(run_config_json));
  EpisodeConfig ec = rc.episode_config();
  ec.policy = variant_config(policy_variant_from_string(variant), ec.policy);
  return ec;
}

}  // namespace

PYBIND11_MODULE(_ninjacut, m) {
  m.doc() = "Multi-material cutting simulation, trajectory optimization and adaptive cutting policy";

  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);

  py::class_<CoreShape>(m, "Core")
      .def_property_readonly("family", [](const CoreShape& c) { return std::string(to_string(c.family)); })
      .def_readonly("params", &CoreShape::params)
      .def_property_readonly("anchor", [](const CoreShape& c) { return Vec2(c.anchor); })
      .def_property_readonly("contour", &contour_array)
      .def("sdf", [](const CoreShape& c, double x, double y) { return core_sdf(c, Vec2(x, y)); }, py::arg("x"),
           py::arg("y"))
      .def("to_json", [](const CoreShape& c) { return core_to_json(c).dump(); });

  m.def("gen_core", [](const std::string& family, std::uint64_t seed) { return gen_core(family_of(family), seed); },
        py::arg("family") = "spline3", py::arg("seed") = 0);
  m.def("make_core",
        [](const std::string& family, const std::vector<double>& params, std::uint64_t seed) {
          return make_core(family_of(family), params, default_anchor(), seed);
        },
        py::arg("family"), py::arg("params"), py::arg("seed") = 0);

  m.def("collision_loss",
        [](const CoreShape& core, double x, double y, double theta) {
          return collision_loss(KnifePose{Vec2(x, y), theta}, core, KnifeGeometry{}, CollisionLossConfig{});
        },
        py::arg("core"), py::arg("x"), py::arg("y"), py::arg("theta"));

  m.def("default_config", []() { return to_json(RunConfig{}).dump(); },
        "Default run configuration as a JSON string.");
  m.def("validate_config", [](const std::string& j) { return to_json(run_config_from_json(nlohmann::json::parse(j))).dump(); },
        "Strict parse; raises ValueError on unknown fields or invalid values.");

  m.def("run_episode",
        [](const CoreShape& core, const std::string& config, const std::string& variant, bool oracle) {
          EpisodeConfig ec = episode_config_of(config, variant);
          ec.oracle = oracle;
          EpisodeResult r;
          {
            py::gil_scoped_release release;
            r = run_episode(core, ec);
          }
          return episode_log_json(core, ec, r, "", variant).dump();
        },
        py::arg("core"), py::arg("config"), py::arg("variant") = "adaptive", py::arg("oracle") = false,
        "Runs one closed-loop episode and returns the episode log as a JSON string.");

  m.def("replay",
        [](const std::string& log_json) {
          const EpisodeLog log = episode_log_from_json(nlohmann::json::parse(log_json));
          const ReplayReport rep = replay_episode(log.core, log.config, log.result);
          return py::make_tuple(rep.identical, rep.steps_checked, rep.mismatch);
        },
        py::arg("log"));

  m.def("estimate",
        [](const CoreShape& core, int k, std::uint64_t seed, double threshold) {
          CounterRng rng(seed);
          const auto ev = synthetic_evidence(core, k, rng);
          EstimatorConfig cfg;
          cfg.threshold = threshold;
          const CoreEstimate e = Estimator(cfg, core.anchor).estimate(ev);
          const double iou = mask_iou(e.mask, core_mask(core, e.window));
          return py::make_tuple(window_array(e.window, e.probability), window_array(e.window, e.mask), iou);
        },
        py::arg("core"), py::arg("k") = 9, py::arg("seed") = 0, py::arg("threshold") = 0.3,
        "Estimate from k synthetic contour points: (probability, mask, iou), rows bottom to top.");

  m.def("gradcheck",
        [](int scenes) {
          GradcheckSpec spec;
          spec.scenes = scenes;
          GradcheckReport rep;
          {
            py::gil_scoped_release release;
            rep = run_gradcheck(spec, LossWeights{}, CollisionLossConfig{}, OptimizerConfig{});
          }
          py::list rows;
          for (const auto& r : rep.rows) {
            py::dict d;
            d["scene"] = r.scene;
            d["particles"] = r.particles;
            d["rel_l2"] = r.rel_l2;
            d["cosine"] = r.cosine;
            d["pass"] = r.pass;
            rows.append(d);
          }
          return rows;
        },
        py::arg("scenes") = 2);
}
