#include "qgraph/eigenphase.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/spectrum.hpp"
#include "qgraph/statistics.hpp"
#include "qgraph/test_function.hpp"
#include "qgraph/torus.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace qgraph;

namespace {

MetricGraph make_graph(std::vector<std::string> vertices, const std::vector<std::tuple<std::string, std::string, double>>& bonds) {
  std::vector<BondSpec> specs;
  for (const auto& [from, to, length] : bonds) specs.push_back({from, to, length});
  return MetricGraph::build(std::move(vertices), specs);
}

// Surface functions by name: "one", "sigma1", "phi_sigma", "phi_d", "moment".
SurfaceFunction surface_function(const MetricGraph& g, const std::string& name, const std::string& h, std::size_t bond,
                                 int m) {
  if (name == "one") return surface_one(g);
  if (name == "sigma1") return surface_first_spacing(g);
  if (name == "phi_sigma") return surface_phi_sigma(g, parse_test_function(h));
  if (name == "phi_d") return surface_phi_d(g, parse_test_function(h));
  if (name == "moment") return surface_moment(g, bond_projector(g, bond), m);
  throw ValidationError("unknown surface function '" + name + "'");
}

std::vector<SurfaceFunction> surface_functions(const MetricGraph& g, const std::vector<std::string>& names,
                                               const std::string& h, std::size_t bond, int m) {
  std::vector<SurfaceFunction> out;
  for (const auto& n : names) out.push_back(surface_function(g, n, h, bond, m));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectral statistics of quantum graphs";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<MetricGraph>(m, "MetricGraph")
      .def(py::init(&make_graph), py::arg("vertices"), py::arg("bonds"),
           "Build from vertex names and (from, to, length) bonds.")
      .def_property_readonly("num_bonds", &MetricGraph::num_bonds)
      .def_property_readonly("dim", &MetricGraph::dim)
      .def_property_readonly("vertices", &MetricGraph::vertices)
      .def_property_readonly("lengths", &MetricGraph::lengths)
      .def_property_readonly("total_length", &MetricGraph::total_length)
      .def_property_readonly("mean_length", &MetricGraph::mean_length)
      .def("warnings", &MetricGraph::warnings)
      .def("with_lengths", &MetricGraph::with_lengths)
      .def("to_json", [](const MetricGraph& g) { return to_json(g); });

  py::class_<BondScatteringMatrix>(m, "ScatteringMatrix")
      .def_static("from_matrix", &BondScatteringMatrix::from_matrix, py::arg("graph"), py::arg("matrix"),
                  py::arg("tol") = 1e-12)
      .def_property_readonly("matrix", &BondScatteringMatrix::matrix);

  py::class_<Observable>(m, "Observable")
      .def_static("from_matrix", &Observable::from_matrix, py::arg("graph"), py::arg("matrix"), py::arg("tol") = 1e-12)
      .def_property_readonly("matrix", &Observable::matrix);

  py::class_<GraphSpec>(m, "GraphSpec")
      .def_readonly("graph", &GraphSpec::graph)
      .def_readonly("s0", &GraphSpec::s0)
      .def_readonly("conditions", &GraphSpec::conditions);
  m.def("load_graph_spec", &load_graph_spec, py::arg("path"));
  m.def("parse_graph_spec", &parse_graph_spec, py::arg("text"));

  py::class_<UnitarityReport>(m, "UnitarityReport")
      .def_readonly("max_deviation", &UnitarityReport::max_deviation)
      .def_readonly("passed", &UnitarityReport::passed)
      .def_property_readonly("mask_violations", [](const UnitarityReport& r) {
        std::vector<std::tuple<std::size_t, std::size_t, double>> out;
        for (const auto& v : r.mask_violations) out.emplace_back(v.row, v.col, v.magnitude);
        return out;
      });

  m.def("kirchhoff_s0", &kirchhoff_s0, py::arg("graph"));
  m.def("validate_unitary", &validate_unitary, py::arg("graph"), py::arg("matrix"), py::arg("tol") = 1e-12);
  m.def("evolution_operator", &evolution_operator, py::arg("graph"), py::arg("s0"), py::arg("lam"));
  m.def("length_observable", &length_observable, py::arg("graph"));
  m.def("bond_projector", &bond_projector, py::arg("graph"), py::arg("bond"));

  m.def("eigenphases", &eigenphases, py::arg("u"));
  m.def("spacing_functions", py::overload_cast<const std::vector<double>&>(&spacing_functions), py::arg("phases"));
  m.def(
      "eigenphase_frame",
      [](const CMatrix& u, const MetricGraph& g) {
        const auto f = eigenphase_frame(u, g);
        return py::make_tuple(f.phases, f.vectors, f.velocities);
      },
      py::arg("u"), py::arg("graph"), "(phases, vectors, velocities)");
  m.def("next_crossing_time", &next_crossing_time, py::arg("graph"), py::arg("s0"), py::arg("x"));

  py::class_<LambdaSpectrum>(m, "LambdaSpectrum")
      .def("expanded", &LambdaSpectrum::expanded)
      .def("__len__", &LambdaSpectrum::size)
      .def_property_readonly("lambda_max", &LambdaSpectrum::lambda_max)
      .def_property_readonly("fingerprint", &LambdaSpectrum::fingerprint)
      .def_property_readonly("levels", [](const LambdaSpectrum& s) {
        std::vector<std::tuple<double, int>> out;
        for (const auto& l : s.levels()) out.emplace_back(l.lambda, l.multiplicity);
        return out;
      })
      .def("basis", [](const LambdaSpectrum& s, std::size_t level) { return s.levels().at(level).basis; });

  m.def(
      "solve_spectrum",
      [](const MetricGraph& g, const BondScatteringMatrix& s0, double lambda_max, bool vectors, unsigned workers) {
        SolveOptions o;
        o.compute_vectors = vectors;
        o.workers = workers;
        return solve_spectrum(g, s0, lambda_max, o);
      },
      py::arg("graph"), py::arg("s0"), py::arg("lambda_max"), py::arg("vectors") = true, py::arg("workers") = 1);

  py::class_<WeylReport>(m, "WeylReport")
      .def_readonly("count", &WeylReport::count)
      .def_readonly("weyl_count", &WeylReport::weyl_count)
      .def_readonly("ratio", &WeylReport::ratio);
  m.def("weyl_check", &weyl_check, py::arg("spectrum"), py::arg("graph"));
  m.def("find_integer_relation", &find_integer_relation, py::arg("lengths"), py::arg("max_coeff") = 20,
        py::arg("tol") = 1e-9);

  py::class_<StatResult>(m, "StatResult")
      .def_readonly("estimate", &StatResult::estimate)
      .def_readonly("stderr", &StatResult::stderr_)
      .def_readonly("samples", &StatResult::samples)
      .def_readonly("diagnostic", &StatResult::diagnostic)
      .def_readonly("note", &StatResult::note)
      .def("__repr__", [](const StatResult& r) {
        return "StatResult(" + std::to_string(r.estimate) + " +- " + std::to_string(r.stderr_) + ")";
      });

  py::class_<TestFunction>(m, "TestFunction")
      .def(py::init<std::string, double, std::function<double(double)>>(), py::arg("name"), py::arg("bound"),
           py::arg("f"))
      .def("__call__", &TestFunction::operator())
      .def_property_readonly("bound", &TestFunction::bound)
      .def_property_readonly("name", &TestFunction::name);
  m.def("parse_test_function", &parse_test_function, py::arg("spec"));

  m.def("normalized_spacings", &normalized_spacings, py::arg("spectrum"), py::arg("graph"), py::arg("r") = 1);
  m.def("lambda_spacing_functional", &lambda_spacing_functional, py::arg("spectrum"), py::arg("graph"), py::arg("h"),
        py::arg("r") = 1);
  m.def("theta_spacing_functional", &theta_spacing_functional, py::arg("graph"), py::arg("s0"), py::arg("h"),
        py::arg("capital_lambda"), py::arg("step") = 0.0, py::arg("workers") = 1);

  py::class_<EquivalenceRow>(m, "EquivalenceRow")
      .def_readonly("delta", &EquivalenceRow::delta)
      .def_readonly("lengths", &EquivalenceRow::lengths)
      .def_readonly("p_lambda", &EquivalenceRow::p_lambda)
      .def_readonly("p_theta", &EquivalenceRow::p_theta)
      .def_readonly("difference", &EquivalenceRow::difference)
      .def_readonly("stderr", &EquivalenceRow::stderr_);
  m.def("spacing_equivalence_study", &spacing_equivalence_study, py::arg("graph"), py::arg("l0"), py::arg("u"),
        py::arg("deltas"), py::arg("h"), py::arg("n"), py::arg("step") = 0.0, py::arg("workers") = 1);

  m.def("evec_moment_spectral", &evec_moment_spectral, py::arg("spectrum"), py::arg("graph"), py::arg("a"), py::arg("m"));
  m.def("evec_moment_lambda_average", &evec_moment_lambda_average, py::arg("graph"), py::arg("s0"), py::arg("a"),
        py::arg("moments"), py::arg("capital_lambda"), py::arg("step") = 0.0, py::arg("workers") = 1);
  m.def("evec_moment_ensemble", &evec_moment_ensemble, py::arg("graph"), py::arg("s0"), py::arg("a"),
        py::arg("moments"), py::arg("samples"), py::arg("seed"), py::arg("workers") = 1);

  m.def("random_torus_points", &random_torus_points, py::arg("n"), py::arg("dim"), py::arg("seed"));
  m.def("flow_point", &flow_point, py::arg("x0"), py::arg("t"), py::arg("graph"));
  m.def(
      "crossing_times",
      [](const MetricGraph& g, const BondScatteringMatrix& s0, const RVector& x0, double t_max) {
        return crossings_from(g, s0, x0, t_max).expanded();
      },
      py::arg("graph"), py::arg("s0"), py::arg("x0"), py::arg("t_max"));
  m.def(
      "ergodic_average",
      [](const std::vector<std::string>& names, const RVector& x0, const MetricGraph& g, const BondScatteringMatrix& s0,
         std::size_t n, const std::string& h, std::size_t bond, int moment) {
        return ergodic_average(surface_functions(g, names, h, bond, moment), x0, g, s0, n);
      },
      py::arg("functions"), py::arg("x0"), py::arg("graph"), py::arg("s0"), py::arg("n"),
      py::arg("h") = "gaussian:c=1,w=0.5", py::arg("bond") = 0, py::arg("moment") = 2,
      "Surface functions by name: one, sigma1, phi_sigma, phi_d, moment.");
  m.def(
      "thickened_average",
      [](const std::vector<std::string>& names, double eps, const MetricGraph& g, const BondScatteringMatrix& s0,
         std::size_t samples, std::uint64_t seed, unsigned workers, const std::string& h, std::size_t bond,
         int moment) {
        return thickened_average(surface_functions(g, names, h, bond, moment), eps, g, s0, samples, seed, workers);
      },
      py::arg("functions"), py::arg("eps"), py::arg("graph"), py::arg("s0"), py::arg("samples"), py::arg("seed"),
      py::arg("workers") = 1, py::arg("h") = "gaussian:c=1,w=0.5", py::arg("bond") = 0, py::arg("moment") = 2);
}
