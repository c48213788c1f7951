// Python bindings. Reports cross the boundary as JSON text; the package
// __init__ turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "parcalm/errors.hpp"
#include "parcalm/report.hpp"

namespace py = pybind11;
using namespace parcalm;

namespace {

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

Vec point(const BilevelProblem& P, const std::vector<double>& y) {
  Vec out = to_vec(y);
  P.check_dimension(out);
  return out;
}

std::string dump(const Json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Analysis of one-parameter bilevel programs";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ProblemError>(m, "ProblemError", base.ptr());
  py::register_exception<InfeasiblePointError>(m, "InfeasiblePointError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<InconclusiveError>(m, "InconclusiveError", base.ptr());

  py::class_<BilevelProblem>(m, "Problem")
      .def_readonly("name", &BilevelProblem::name)
      .def_readonly("m", &BilevelProblem::m)
      .def_property_readonly("p", &BilevelProblem::p)
      .def("serialize", [](const BilevelProblem& P) { return serialize(P); })
      .def("set_tolerance", [](BilevelProblem& P, const std::string& key, double v) {
        Tolerances t = P.tol;
        if (key == "active") t.active = v;
        else if (key == "rank") t.rank = v;
        else if (key == "multiplier") t.multiplier = v;
        else if (key == "eigenvalue") t.eigenvalue = v;
        else if (key == "residual") t.residual = v;
        else if (key == "grid") t.grid = static_cast<int>(v);
        else if (key == "multistart") t.multistart = static_cast<int>(v);
        else throw ProblemError("unknown tolerance '" + key + "'");
        t.validate();
        P.tol = t;
      })
      .def("__repr__", [](const BilevelProblem& P) {
        return "<Problem " + P.name + " m=" + std::to_string(P.m) + " p=" + std::to_string(P.p()) + ">";
      });

  m.def("load_problem", [](const std::string& text) { return load_problem(text); });
  m.def("resolve_problem", &resolve_problem, py::arg("source"));
  m.def("builtin_names", &builtin_names);

  m.def("classify", [](const BilevelProblem& P, double x, const std::vector<double>& y, bool simplicity) {
    Vec yy = point(P, y);
    return dump(to_json(simplicity ? classify_simplicity(P, x, yy) : classify_point(P, x, yy)));
  }, py::arg("problem"), py::arg("x"), py::arg("y"), py::arg("simplicity") = true);

  m.def("solve_lower", [](const BilevelProblem& P, double x) { return dump(to_json(solve_lower_global(P, x))); });

  m.def("trace", [](const BilevelProblem& P, double x, const std::vector<double>& y, double to, double step) {
    CurveSegment c = trace_branch(P, branch_point_at(P, x, point(P, y)), to, step);
    return dump(to_json(c));
  }, py::arg("problem"), py::arg("x"), py::arg("y"), py::arg("to"), py::arg("step") = 0.01);

  m.def("check_stationarity", [](const BilevelProblem& P, double x, const std::vector<double>& y) {
    Vec yy = point(P, y);
    StationarityReport r = cross_validate(P, x, yy);
    Json j = to_json(r);
    j["certificate_residual"] = certificate_residual(P, x, yy, r);
    return dump(j);
  });

  m.def("mpcc_licq", [](const BilevelProblem& P, double x, const std::vector<double>& y,
                        const std::vector<double>& u) { return dump(to_json(mpcc_licq(P, x, point(P, y), to_vec(u)))); });

  m.def("estimate_modulus", [](const BilevelProblem& P, double x, const std::vector<double>& y, double radius,
                               int samples, const std::string& condition, bool uwsm, double v_max,
                               std::uint64_t seed) {
    Vec yy = point(P, y);
    SigmaKind kind = sigma_from_string(condition);
    PEBReport r;
    {
      py::gil_scoped_release release;
      r = uwsm ? estimate_uwsm_modulus(P, x, yy, radius, samples, kind, seed, v_max)
               : estimate_peb_modulus(P, x, yy, radius, v_max, samples, kind, seed);
    }
    return dump(to_json(r));
  }, py::arg("problem"), py::arg("x"), py::arg("y"), py::arg("radius") = 0.2, py::arg("samples") = 200,
     py::arg("condition") = "FJ", py::arg("uwsm") = false, py::arg("v_max") = 1.0, py::arg("seed") = 0);

  m.def("verify_calmness", [](const BilevelProblem& P, double x, const std::vector<double>& y, double mu,
                              double radius, int samples, const std::string& condition, std::uint64_t seed) {
    Vec yy = point(P, y);
    CalmnessReport r;
    {
      py::gil_scoped_release release;
      r = verify_partial_calmness(P, x, yy, mu, radius, samples, sigma_from_string(condition), seed);
    }
    return dump(to_json(r));
  }, py::arg("problem"), py::arg("x"), py::arg("y"), py::arg("mu"), py::arg("radius") = 0.2,
     py::arg("samples") = 200, py::arg("condition") = "FJ", py::arg("seed") = 0);

  m.def("solve", [](const BilevelProblem& P, int grid) { return dump(to_json(solve_bilevel(P, grid))); },
        py::arg("problem"), py::arg("grid") = 201);

  m.def("corpus", [](std::uint64_t seed) {
    CorpusSummary s;
    {
      py::gil_scoped_release release;
      s = corpus_check(corpus_entries(), nullptr, seed);
    }
    return dump(to_json(s));
  }, py::arg("seed") = 0);
}
