// Python bindings: weights, ball averages, cylinders, derived constants,
// experiments and acceptance criteria. Reports cross the boundary as JSON text
// and are decoded on the Python side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wrlab/ball_calculus.hpp"
#include "wrlab/config.hpp"
#include "wrlab/covering.hpp"
#include "wrlab/experiments.hpp"
#include "wrlab/geometry.hpp"
#include "wrlab/suite.hpp"

namespace py = pybind11;
using namespace wrlab;

namespace {

Point to_point(const std::vector<double>& v) {
    if (v.size() > kMaxDim) throw DomainError("point has more than 3 coordinates");
    Point p{0.0, 0.0, 0.0};
    std::copy(v.begin(), v.end(), p.begin());
    return p;
}

BallFamily lattice_family(int n, double radius, double spacing, double r_min) {
    return BallFamily::lattice(n, Ball{{0.0, 0.0, 0.0}, radius}, spacing * radius, r_min * radius);
}

}  // namespace

PYBIND11_MODULE(_wrlab, m) {
    m.doc() = "weighted parabolic estimates laboratory (native core)";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<Weight>(m, "Weight")
        .def(py::init([](const std::string& text, int n) { return parse_weight(text, n); }), py::arg("spec"),
             py::arg("n") = 2)
        .def_property_readonly("n", &Weight::dim)
        .def("__call__", [](const Weight& w, const std::vector<double>& x) { return w(to_point(x)); })
        .def("spec", &Weight::spec_string)
        .def("__repr__", [](const Weight& w) { return "Weight('" + w.spec_string() + "')"; });

    m.def(
        "ball_average",
        [](const Weight& w, const std::vector<double>& centre, double r, double power) {
            return ball_average(w, Ball{to_point(centre), r}, power);
        },
        py::arg("w"), py::arg("centre"), py::arg("r"), py::arg("power") = 1.0,
        "Average of w^power over B_r(centre).");

    m.def(
        "ap_characteristic",
        [](const Weight& w, double p, double radius, double spacing, double r_min) {
            return ap_characteristic(w, p, lattice_family(w.dim(), radius, spacing, r_min)).value;
        },
        py::arg("w"), py::arg("p"), py::arg("radius") = 1.0, py::arg("spacing") = 0.25, py::arg("r_min") = 0.125,
        "A_p characteristic over a lattice ball family (a lower bound for the supremum).");

    m.def(
        "bmo_q",
        [](const Weight& w, double q, double radius, double spacing, double r_min) {
            const auto F = lattice_family(w.dim(), radius, spacing, r_min);
            return bmo_q(w, q, F.domain, F).value;
        },
        py::arg("w"), py::arg("q") = 1.0, py::arg("radius") = 1.0, py::arg("spacing") = 0.25,
        py::arg("r_min") = 0.125);

    m.def(
        "cylinder",
        [](const Weight& w, const std::vector<double>& centre, double s, double r, const std::string& kind) {
            if (kind != "C" && kind != "Q") throw DomainError("kind must be 'C' or 'Q'");
            const auto c = make_cylinder(w, to_point(centre), s, r, kind == "C" ? CylinderKind::C : CylinderKind::Q);
            py::dict d;
            d["radius"] = c.radius();
            d["height"] = c.height();
            d["t_begin"] = c.t_begin();
            d["t_end"] = c.t_end();
            return d;
        },
        py::arg("w"), py::arg("centre"), py::arg("s") = 0.0, py::arg("r") = 1.0, py::arg("kind") = "C");

    m.def(
        "derived_constants",
        [](int n, double K0, double q0) {
            const auto k = derived_constants(n, K0, q0);
            py::dict d;
            d["xi0"] = k.xi0;
            d["l0"] = k.l0;
            d["xi1"] = k.xi1;
            d["identity_residual"] = k.identity_residual;
            return d;
        },
        py::arg("n"), py::arg("K0"), py::arg("q0"));

    m.def("experiment_names", &experiment_names);
    m.def(
        "experiment_defaults",
        [](const std::string& name) { return ExperimentConfig::defaults(name).to_config().values(); },
        py::arg("name"));
    m.def(
        "run_experiment_json",
        [](const std::string& name, const std::map<std::string, std::string>& overrides) {
            Config c = ExperimentConfig::defaults(name).to_config();
            for (const auto& [k, v] : overrides) {
                if (!c.has(k)) throw DomainError("unknown setting '" + k + "' for experiment " + name);
                c.set(k, v);
            }
            const auto cfg = ExperimentConfig::from_config(name, c);
            py::gil_scoped_release release;
            return run_experiment(cfg).report.to_json().dump();
        },
        py::arg("name"), py::arg("overrides") = std::map<std::string, std::string>{});

    m.def("criterion_title", &criterion_title, py::arg("id"));
    m.def(
        "run_criterion_json",
        [](int id, std::uint64_t seed) {
            py::gil_scoped_release release;
            return run_criterion(id, seed).to_json().dump();
        },
        py::arg("id"), py::arg("seed") = 1);

    m.def("set_thread_count", &set_thread_count, py::arg("threads"));
}
