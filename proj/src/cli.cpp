#include "envlab/cli.hpp"

#include "envlab/derivation.hpp"
#include "envlab/errors.hpp"
#include "envlab/json_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace envlab {

namespace {

struct Options {
  Config config;
  std::string ruleset = "barnum";
  bool strict = false;
  std::string out_path;

  std::string state_path;
  std::string unitary_path;
  bool exact_phase = false;
  std::vector<int> pair{0, 1};
  double epsilon = 1e-3;
  std::string ancilla = "E";
  int restarts = 50;
  int iterations = 200;
  std::string remote = "E";
};

Ruleset load_ruleset(const std::string& spec) {
  constexpr std::string_view prefix = "custom:";
  if (spec.rfind(prefix, 0) == 0) return ruleset_from_json(read_json_file(spec.substr(prefix.size())));
  return Ruleset::named(spec);
}

PureState load_state(const Options& o) { return state_from_json(read_json_file(o.state_path), o.config); }

bool determined(const DerivationCertificate& cert) { return cert.status == DerivationStatus::Determined; }

void emit(const Options& o, const Json& j, std::ostream& out) {
  const std::string text = dump_json(j);
  if (o.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(o.out_path, std::ios::binary);
  if (!file) throw ValidationError("cannot write " + o.out_path);
  file << text;
}

int cmd_schmidt(const Options& o, std::ostream& out) {
  emit(o, schmidt_to_json(schmidt_decompose(load_state(o), o.config.tol)), out);
  return kExitOk;
}

int cmd_envariant(const Options& o, std::ostream& out) {
  const PureState state = load_state(o);
  const LocalUnitary u = unitary_from_json(read_json_file(o.unitary_path), o.config.tol);
  EnvarianceOptions eo;
  eo.strict = o.exact_phase;
  emit(o, verdict_to_json(is_envariant(state, u, o.config.tol, eo)), out);
  return kExitOk;
}

int cmd_protocol(const Options& o, std::ostream& out) {
  const PureState state = load_state(o);
  const Ruleset ruleset = load_ruleset(o.ruleset);
  ProtocolOptions po;
  const ProtocolTrace trace = run_swap_protocol(state, {o.pair[0], o.pair[1]}, po, o.config.tol);
  const ConstraintLedger ledger = emit_constraints(trace, ruleset, o.config.tol);
  const DerivationCertificate cert = certify_trace(trace, ledger, ruleset, o.config.tol);
  emit(o,
       Json{{"v", kSchemaVersion},
            {"trace", trace_to_json(trace, ruleset, ledger)},
            {"ledger", ledger_to_json(ledger)},
            {"certificate", certificate_to_json(cert)}},
       out);
  return o.strict && !determined(cert) ? kExitNotDetermined : kExitOk;
}

int cmd_derive(const Options& o, std::ostream& out) {
  const PureState state = load_state(o);
  DerivationOptions d;
  d.ruleset = load_ruleset(o.ruleset);
  d.config = o.config;
  d.ancilla_side = parse_side(o.ancilla);
  const DerivationCertificate cert = derive_general(state, o.epsilon, d);
  emit(o, certificate_to_json(cert), out);
  return o.strict && !determined(cert) ? kExitNotDetermined : kExitOk;
}

int cmd_nosignal(const Options& o, std::ostream& out) {
  const PureState state = load_state(o);
  SearchOptions so;
  so.restarts = o.restarts;
  so.iterations = o.iterations;
  so.seed = o.config.seed;
  emit(o, report_to_json(adversarial_search(state, parse_side(o.remote), so, o.config.tol)), out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Envariance swap protocols, constraint ledgers and Born-rule derivations", "envlab"};
  app.require_subcommand(1);
  app.fallthrough();

  auto& tol = o.config.tol;
  app.add_option("--ruleset", o.ruleset, "zurek | barnum | <base>-without-<RULE> | custom:<file>");
  app.add_option("--seed", o.config.seed, "Random seed")->envname("ENVLAB_SEED");
  app.add_flag("--strict", o.strict, "Exit 3 unless the derivation is DETERMINED");
  app.add_option("--out", o.out_path, "Write JSON here instead of stdout");
  app.add_option("--tol-norm", tol.norm)->check(CLI::PositiveNumber);
  app.add_option("--tol-state", tol.state)->check(CLI::PositiveNumber);
  app.add_option("--tol-ortho", tol.ortho)->check(CLI::PositiveNumber);
  app.add_option("--tol-unitary", tol.unitary)->check(CLI::PositiveNumber);
  app.add_option("--tol-spec", tol.spec)->check(CLI::PositiveNumber);
  app.add_option("--tol-solver", tol.solver)->check(CLI::PositiveNumber);
  app.add_option("--max-dim", o.config.max_total_dim, "Cap on the total Hilbert space dimension")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-denominator", o.config.max_denominator, "Largest M tried when approximating")
      ->check(CLI::PositiveNumber);

  int code = kExitOk;
  auto* schmidt = app.add_subcommand("schmidt", "Schmidt decomposition of a bipartite state");
  schmidt->add_option("state", o.state_path)->required();
  schmidt->callback([&] { code = cmd_schmidt(o, out); });

  auto* envariant = app.add_subcommand("envariant", "Test a local unitary for envariance");
  envariant->add_option("state", o.state_path)->required();
  envariant->add_option("unitary", o.unitary_path)->required();
  envariant->add_flag("--exact-phase", o.exact_phase, "Do not allow a global phase");
  envariant->callback([&] { code = cmd_envariant(o, out); });

  auto* protocol = app.add_subcommand("protocol", "Run the swap protocol on a pair of Schmidt branches");
  protocol->add_option("state", o.state_path)->required();
  protocol->add_option("--pair", o.pair, "Schmidt indices k l")->expected(2)->delimiter(',');
  protocol->callback([&] { code = cmd_protocol(o, out); });

  auto* derive = app.add_subcommand("derive", "Derive the branch probabilities of a state");
  derive->add_option("state", o.state_path)->required();
  derive->add_option("--epsilon", o.epsilon, "Approximation tolerance for irrational weights");
  derive->add_option("--ancilla", o.ancilla, "Side the fine-graining ancilla meets")
      ->check(CLI::IsMember({"S", "E"}));
  derive->callback([&] { code = cmd_derive(o, out); });

  auto* nosignal = app.add_subcommand("nosignal", "Search remote unitaries for a change of the local state");
  nosignal->add_option("state", o.state_path)->required();
  nosignal->add_option("--restarts", o.restarts)->check(CLI::NonNegativeNumber);
  nosignal->add_option("--iters", o.iterations)->check(CLI::NonNegativeNumber);
  nosignal->add_option("--remote", o.remote, "Side the unitary acts on")->check(CLI::IsMember({"S", "E"}));
  nosignal->callback([&] { code = cmd_nosignal(o, out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "envlab: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "envlab: invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const PreconditionError& e) {
    err << "envlab: precondition failed: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DerivationError& e) {
    err << "envlab: derivation failed: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "envlab: error: " << e.what() << "\n";
    return kExitError;
  }
  return code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"envlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace envlab
