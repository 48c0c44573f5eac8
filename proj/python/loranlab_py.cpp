// Copyright 2026 The LoRAN Lab Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings for the core operations. Matrices cross the boundary as
// float64 numpy arrays; configs and reports cross as plain dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "loranlab/analysis.hpp"
#include "loranlab/experiment.hpp"
#include "loranlab/gradcheck.hpp"

namespace py = pybind11;
using namespace loran;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
  Tensor t = Tensor::zeros(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

Array to_array(const Tensor& t) {
  Array out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Adapter make_adapter(const Array& b, const Array& a, double alpha, const std::optional<ActivationSpec>& f,
                     bool scale_inside) {
  LoRAAdapter inner{to_tensor(b), to_tensor(a), static_cast<std::size_t>(b.ndim() == 2 ? b.shape(1) : 0), alpha};
  if (inner.b.cols() != inner.a.rows()) throw DimensionError("B and A ranks differ");
  if (!f) return inner;
  return LoRANAdapter{std::move(inner), *f, scale_inside};
}

}  // namespace

PYBIND11_MODULE(loranlab, m) {
  m.doc() = "LoRA / LoRAN adapter laboratory";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  py::class_<ActivationSpec>(m, "Activation")
      .def_static("identity", &ActivationSpec::identity)
      .def_static("sigmoid", &ActivationSpec::sigmoid)
      .def_static("relu", &ActivationSpec::relu)
      .def_static("tanh", &ActivationSpec::tanh)
      .def_static("swish", &ActivationSpec::swish, py::arg("beta"))
      .def_static("sinter", &ActivationSpec::sinter, py::arg("amplitude"), py::arg("omega"))
      .def_readonly("beta", &ActivationSpec::beta)
      .def_readonly("amplitude", &ActivationSpec::amplitude)
      .def_readonly("omega", &ActivationSpec::omega)
      .def_property_readonly("kind", [](const ActivationSpec& s) { return std::string(to_string(s.kind)); })
      .def_property_readonly("label", &ActivationSpec::label)
      .def("__call__", [](const ActivationSpec& s, double x) { return activation_eval(s, x); })
      .def("deriv", [](const ActivationSpec& s, double x) { return activation_deriv(s, x); })
      .def("__repr__", [](const ActivationSpec& s) { return "Activation(" + s.label() + ")"; });

  m.def(
      "init_adapter",
      [](std::size_t d, std::size_t k, std::size_t r, double alpha, std::uint64_t seed) {
        const LoRAAdapter a = init_adapter(d, k, r, alpha, seed);
        return py::make_tuple(to_array(a.b), to_array(a.a));
      },
      py::arg("d"), py::arg("k"), py::arg("rank"), py::arg("alpha"), py::arg("seed"),
      "Returns (B, A): B zeros (d x r), A ~ N(0, 1/r) (r x k).");

  m.def(
      "delta_weight",
      [](const Array& b, const Array& a, double alpha, std::optional<ActivationSpec> activation, bool scale_inside) {
        return to_array(delta_weight(make_adapter(b, a, alpha, activation, scale_inside)));
      },
      py::arg("b"), py::arg("a"), py::arg("alpha"), py::arg("activation") = py::none(),
      py::arg("scale_inside") = true, "LoRA update s*BA, or the LoRAN update when an activation is given.");

  m.def(
      "svd_values", [](const Array& a) { return svd_values(to_tensor(a)); }, py::arg("m"),
      "Singular values, descending.");
  m.def(
      "numerical_rank", [](const std::vector<double>& v, double tol) { return numerical_rank(v, tol); },
      py::arg("values"), py::arg("tol") = 1e-8, "Count of values above tol * max.");
  m.def(
      "effective_rank", [](const std::vector<double>& v) { return effective_rank(v); }, py::arg("values"));

  m.def("default_config", [] { return to_py(to_json(ExperimentConfig{})); });
  m.def(
      "run_experiment",
      [](const py::object& config, std::uint64_t seed) {
        const ExperimentConfig cfg = experiment_from_json(from_py(config));
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, seed);
        }
        return to_py(to_json(r.report, false));
      },
      py::arg("config"), py::arg("seed"), "Trains one run; returns its report without timing fields.");
  m.def(
      "grid_search",
      [](const py::object& config, std::vector<double> amplitudes, std::vector<double> omegas,
         std::vector<std::uint64_t> seeds, std::size_t jobs) {
        const ExperimentConfig cfg = experiment_from_json(from_py(config));
        GridResult g;
        {
          py::gil_scoped_release release;
          g = grid_search(amplitudes, omegas, cfg, seeds, jobs);
        }
        return to_py(to_json(g, false));
      },
      py::arg("config"), py::arg("amplitudes"), py::arg("omegas"), py::arg("seeds"), py::arg("jobs") = 1);

  m.def(
      "gradcheck",
      [](const std::string& scope, std::size_t seeds) {
        GradcheckOptions opts;
        try {
          opts.scope = parse_gradcheck_scope(scope);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
        opts.seeds = seeds;
        py::list out;
        for (const auto& e : run_gradcheck_suite(opts)) {
          py::dict d;
          d["name"] = e.name;
          d["step"] = e.step;
          d["max_rel_error"] = e.max_rel_error;
          d["passed"] = e.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("scope") = "all", py::arg("seeds") = 20);
}
