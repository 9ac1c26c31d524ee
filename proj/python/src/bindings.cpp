#include "envlab/cli.hpp"
#include "envlab/derivation.hpp"
#include "envlab/errors.hpp"
#include "envlab/json_io.hpp"
#include "envlab/nosignal.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace envlab;

namespace {

// Structured results cross the boundary as JSON text; the Python package
// decodes them into dicts.
std::string text(const Json& j) { return dump_json(j); }

DerivationOptions derivation_options(const std::string& ruleset, const std::string& ancilla) {
  DerivationOptions o;
  o.ruleset = Ruleset::named(ruleset);
  o.ancilla_side = parse_side(ancilla);
  return o;
}

}  // namespace

PYBIND11_MODULE(_envlab, m) {
  m.doc() = "Envariance swap protocols, constraint ledgers and Born-rule derivations";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", error.ptr());
  py::register_exception<DerivationError>(m, "DerivationError", error.ptr());

  py::class_<PureState>(m, "PureState")
      .def(py::init([](std::vector<int> dims, CVector amplitudes, std::string label) {
             return PureState(std::move(dims), std::move(amplitudes), std::move(label));
           }),
           py::arg("dims"), py::arg("amplitudes"), py::arg("label") = "")
      .def_property_readonly("dims", &PureState::dims)
      .def_property_readonly("amplitudes", &PureState::amplitudes)
      .def_property_readonly("label", &PureState::label)
      .def_property_readonly("has_exact", [](const PureState& s) { return s.exact().has_value(); })
      .def("as_matrix", &PureState::as_matrix)
      .def("to_json", [](const PureState& s) { return text(state_to_json(s)); })
      .def_static("from_json", [](const std::string& t) { return state_from_json(parse_json(t)); })
      .def("__repr__", [](const PureState& s) {
        std::ostringstream os;
        os << "PureState(dims=[";
        for (std::size_t i = 0; i < s.dims().size(); ++i) os << (i ? ", " : "") << s.dims()[i];
        os << "], label='" << s.label() << "')";
        return os.str();
      });

  py::class_<LocalUnitary>(m, "LocalUnitary")
      .def(py::init([](const std::string& side, CMatrix matrix) {
             return LocalUnitary(parse_side(side), std::move(matrix));
           }),
           py::arg("side"), py::arg("matrix"))
      .def_property_readonly("side", [](const LocalUnitary& u) { return std::string(side_name(u.side())); })
      .def_property_readonly("matrix", &LocalUnitary::matrix);

  py::class_<SchmidtForm>(m, "SchmidtForm")
      .def_readonly("coefficients", &SchmidtForm::coefficients)
      .def_readonly("basis_S", &SchmidtForm::basis_S)
      .def_readonly("basis_E", &SchmidtForm::basis_E)
      .def_property_readonly("rank", &SchmidtForm::rank);

  py::class_<EnvarianceVerdict>(m, "EnvarianceVerdict")
      .def_readonly("envariant", &EnvarianceVerdict::envariant)
      .def_readonly("witness", &EnvarianceVerdict::witness)
      .def_readonly("residual", &EnvarianceVerdict::residual)
      .def_readonly("reduced_state_deviation", &EnvarianceVerdict::reduced_state_deviation)
      .def_readonly("witness_verified", &EnvarianceVerdict::witness_verified);

  m.def("bell_state", [] { return equal_amplitude_state(2, "psi1"); });
  m.def("equal_amplitude_state", [](int n) { return equal_amplitude_state(n, "psi1"); }, py::arg("n"));
  m.def("rational_diagonal_state",
        [](const std::vector<std::int64_t>& counts) { return rational_diagonal_state(counts, "psi"); },
        py::arg("counts"));
  m.def("state_from_matrix", [](const CMatrix& a, std::string label) { return state_from_matrix(a, label); },
        py::arg("matrix"), py::arg("label") = "");

  m.def("schmidt_decompose", [](const PureState& s) { return schmidt_decompose(s); }, py::arg("state"));
  m.def("partial_trace",
        [](const PureState& s, const std::string& keep) { return partial_trace(s, parse_side(keep)).matrix(); },
        py::arg("state"), py::arg("keep"));
  m.def("born_probability",
        [](const PureState& s, const std::string& side, int outcome) {
          return born_probability(s, parse_side(side), outcome);
        },
        py::arg("state"), py::arg("side"), py::arg("outcome"));
  m.def("apply_local", [](const PureState& s, const LocalUnitary& u) { return apply_local(s, u); },
        py::arg("state"), py::arg("unitary"));

  m.def("is_envariant",
        [](const PureState& s, const LocalUnitary& u, bool strict) {
          EnvarianceOptions o;
          o.strict = strict;
          return is_envariant(s, u, {}, o);
        },
        py::arg("state"), py::arg("unitary"), py::arg("strict") = false);

  m.def("_run_protocol",
        [](const PureState& s, std::pair<int, int> pair, const std::string& ruleset) {
          const Ruleset rules = Ruleset::named(ruleset);
          const ProtocolTrace trace = run_swap_protocol(s, pair);
          const ConstraintLedger ledger = emit_constraints(trace, rules);
          const DerivationCertificate cert = certify_trace(trace, ledger, rules);
          return text(Json{{"trace", trace_to_json(trace, rules, ledger)},
                           {"ledger", ledger_to_json(ledger)},
                           {"certificate", certificate_to_json(cert)}});
        },
        py::arg("state"), py::arg("pair"), py::arg("ruleset"));
  m.def("_derive_equal_case",
        [](int n, const std::string& ruleset) {
          return text(certificate_to_json(derive_equal_case(n, derivation_options(ruleset, "E"))));
        },
        py::arg("n"), py::arg("ruleset"));
  m.def("_derive_rational",
        [](const std::vector<std::int64_t>& counts, const std::string& ruleset, const std::string& ancilla) {
          const RationalSpec spec(counts);
          return text(certificate_to_json(derive_rational(rational_diagonal_state(spec.counts, "psi"), spec,
                                                          derivation_options(ruleset, ancilla))));
        },
        py::arg("counts"), py::arg("ruleset"), py::arg("ancilla"));
  m.def("_derive_general",
        [](const PureState& s, double epsilon, const std::string& ruleset, const std::string& ancilla) {
          return text(certificate_to_json(derive_general(s, epsilon, derivation_options(ruleset, ancilla))));
        },
        py::arg("state"), py::arg("epsilon"), py::arg("ruleset"), py::arg("ancilla"));
  m.def("_adversarial_search",
        [](const PureState& s, const std::string& remote, int restarts, int iterations, std::uint64_t seed) {
          SearchOptions o;
          o.restarts = restarts;
          o.iterations = iterations;
          o.seed = seed;
          py::gil_scoped_release release;
          return text(report_to_json(adversarial_search(s, parse_side(remote), o)));
        },
        py::arg("state"), py::arg("remote"), py::arg("restarts"), py::arg("iterations"), py::arg("seed"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out;
          std::ostringstream err;
          const int code = run_cli(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
