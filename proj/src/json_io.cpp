#include "envlab/json_io.hpp"

#include "envlab/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace envlab {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

const Json& field(const Json& j, const char* key, std::string_view what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string(what) + " is missing field '" + key + "'");
  return *it;
}

void check_version(const Json& j, std::string_view what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
  auto it = j.find("v");
  if (it == j.end()) return;
  if (!it->is_number_integer() || it->get<std::int64_t>() != kSchemaVersion) {
    throw ValidationError(std::string(what) + " has unsupported schema version " + it->dump());
  }
}

double number(const Json& j, std::string_view what) {
  if (!j.is_number()) throw ValidationError(std::string(what) + " must be a number");
  return j.get<double>();
}

std::int64_t integer(const Json& j, std::string_view what) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double x = j.get<double>();
    if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9.0e15) return static_cast<std::int64_t>(x);
  }
  throw ValidationError(std::string(what) + " must be an integer");
}

Complex complex_from_json(const Json& j, std::string_view what) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], what), number(j[1], what)};
  throw ValidationError(std::string(what) + " must be a number or an [re, im] pair");
}

Json complex_to_json(const Complex& z) { return Json::array({z.real(), z.imag()}); }

Json vector_to_json(const RVector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json big_to_json(const BigInt& x) {
  if (x >= std::numeric_limits<std::int64_t>::min() && x <= std::numeric_limits<std::int64_t>::max()) {
    return x.convert_to<std::int64_t>();
  }
  return x.str();
}

BigInt big_from_json(const Json& j) {
  if (j.is_number_integer()) return BigInt(j.get<std::int64_t>());
  if (j.is_string()) {
    try {
      return BigInt(j.get<std::string>());
    } catch (const std::exception&) {
    }
  }
  throw ValidationError("rational parts must be integers or decimal strings");
}

Json labels_to_json(const std::vector<ProbabilityLabel>& labels, std::size_t from = 0) {
  Json out = Json::array();
  for (std::size_t i = from; i < labels.size(); ++i) out.push_back(labels[i].str());
  return out;
}

std::vector<ProbabilityLabel> labels_from_json(const Json& j) {
  if (!j.is_array()) throw ValidationError("labels must be an array of strings");
  std::vector<ProbabilityLabel> out;
  for (const auto& x : j) {
    if (!x.is_string()) throw ValidationError("labels must be strings");
    out.push_back(ProbabilityLabel::parse(x.get<std::string>()));
  }
  return out;
}

Json block_to_json(const DegenerateBlock& b) {
  return Json{{"begin", b.begin}, {"end", b.end}, {"spread", b.spread}};
}

Json assertion_to_json(const Assertion& a) {
  Json out{{"kind", a.kind}, {"pass", a.pass}, {"distance", a.distance}, {"phase", a.phase}};
  if (!a.detail.empty()) out["detail"] = a.detail;
  if (a.witness) out["witness"] = unitary_to_json(*a.witness);
  return out;
}

}  // namespace

Json parse_json(std::string_view text, std::string_view source) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    // Drop the library's own prefix and position, keep the explanation.
    if (auto pos = what.find(": "); pos != std::string::npos) what = what.substr(pos + 2);
    // Echo the offending line.
    std::size_t begin = end;
    while (begin > 0 && text[begin - 1] != '\n') --begin;
    std::size_t stop = end;
    while (stop < text.size() && text[stop] != '\n') ++stop;
    std::ostringstream os;
    os << source << ':' << line << ':' << column << ": " << what << "\n  " << text.substr(begin, stop - begin);
    throw ValidationError(os.str());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json(buf.str(), path);
}

namespace {

void write_double(std::string& out, double x) {
  if (!std::isfinite(x)) {
    out += "null";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  const std::string_view digits(buf, static_cast<std::size_t>(res.ptr - buf));
  out += digits;
  // Keep floats recognisable as floats.
  if (digits.find_first_of(".e") == std::string_view::npos) out += ".0";
}

void write(std::string& out, const Json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
  const std::string close(static_cast<std::size_t>(depth) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += Json(it.key()).dump();
        out += ": ";
        write(out, it.value(), depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        write(out, j[i], depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float:
      write_double(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  write(out, j, 0);
  out += "\n";
  return out;
}

Json rational_to_json(const Rational& q) {
  return Json{{"num", big_to_json(numerator(q))}, {"den", big_to_json(denominator(q))}};
}

Rational rational_from_json(const Json& j) {
  if (j.is_number_integer()) return Rational(BigInt(j.get<std::int64_t>()));
  const BigInt num = big_from_json(field(j, "num", "rational"));
  const BigInt den = big_from_json(field(j, "den", "rational"));
  if (den == 0) throw ValidationError("rational with zero denominator");
  return Rational(num, den);
}

Json matrix_to_json(const CMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("matrix must be a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  CMatrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols || cols == 0) {
      throw ValidationError("matrix rows must be arrays of equal, nonzero length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = complex_from_json(j[r][c], "matrix entry");
    }
  }
  return m;
}

Json state_to_json(const PureState& state) {
  Json out{{"v", kSchemaVersion}, {"dims", state.dims()}};
  Json amps = Json::array();
  for (Eigen::Index i = 0; i < state.amplitudes().size(); ++i) amps.push_back(complex_to_json(state.amplitudes()[i]));
  out["amplitudes"] = std::move(amps);
  out["label"] = state.label();
  if (const auto& ex = state.exact()) {
    out["exact"] = Json{{"num", ex->num}, {"den", ex->den}, {"signs", ex->signs}};
  }
  return out;
}

PureState state_from_json(const Json& j, const Config& config) {
  check_version(j, "state");
  const Json& jd = field(j, "dims", "state");
  if (!jd.is_array()) throw ValidationError("state dims must be an array");
  std::vector<int> dims;
  for (const auto& d : jd) {
    const std::int64_t x = integer(d, "state dimension");
    if (x < 1 || x > std::numeric_limits<int>::max()) throw ValidationError("subsystem dimensions must be positive");
    dims.push_back(static_cast<int>(x));
  }
  std::string label;
  if (auto it = j.find("label"); it != j.end()) {
    if (!it->is_string()) throw ValidationError("state label must be a string");
    label = it->get<std::string>();
  }
  std::optional<ExactAmplitudes> exact;
  if (auto it = j.find("exact"); it != j.end() && !it->is_null()) {
    ExactAmplitudes ex;
    const Json& num = field(*it, "num", "exact annotation");
    if (!num.is_array()) throw ValidationError("exact num must be an array");
    for (const auto& x : num) ex.num.push_back(integer(x, "exact numerator"));
    ex.den = integer(field(*it, "den", "exact annotation"), "exact denominator");
    if (auto s = it->find("signs"); s != it->end()) {
      if (!s->is_array()) throw ValidationError("exact signs must be an array");
      for (const auto& x : *s) ex.signs.push_back(static_cast<int>(integer(x, "exact sign")));
    } else {
      ex.signs.assign(ex.num.size(), 1);
    }
    exact = std::move(ex);
  }
  auto amp_it = j.find("amplitudes");
  if (amp_it == j.end()) {
    if (!exact) throw ValidationError("state needs 'amplitudes' or an 'exact' annotation");
    std::size_t total = 1;
    for (int d : dims) {
      total *= static_cast<std::size_t>(d);
      if (total > config.max_total_dim) {
        throw ValidationError("total dimension exceeds the cap of " + std::to_string(config.max_total_dim));
      }
    }
    return PureState::from_exact(std::move(dims), std::move(*exact), std::move(label));
  }
  if (!amp_it->is_array()) throw ValidationError("state amplitudes must be an array");
  CVector amps(static_cast<Eigen::Index>(amp_it->size()));
  for (std::size_t i = 0; i < amp_it->size(); ++i) {
    amps[static_cast<Eigen::Index>(i)] = complex_from_json((*amp_it)[i], "amplitude " + std::to_string(i));
  }
  PureState state(std::move(dims), std::move(amps), std::move(label), config.tol, config.max_total_dim);
  if (exact) return state.with_exact(std::move(*exact), config.tol);
  return state;
}

Json unitary_to_json(const LocalUnitary& u) {
  return Json{{"v", kSchemaVersion}, {"side", side_name(u.side())}, {"matrix", matrix_to_json(u.matrix())}};
}

LocalUnitary unitary_from_json(const Json& j, const Tolerances& tol) {
  check_version(j, "unitary");
  const Json& side = field(j, "side", "unitary");
  if (!side.is_string()) throw ValidationError("unitary side must be a string");
  return LocalUnitary(parse_side(side.get<std::string>()), matrix_from_json(field(j, "matrix", "unitary")), tol);
}

Json schmidt_to_json(const SchmidtForm& form) {
  Json blocks = Json::array();
  for (const auto& b : form.blocks) blocks.push_back(block_to_json(b));
  return Json{{"v", kSchemaVersion},
              {"rank", form.rank()},
              {"coefficients", vector_to_json(form.coefficients)},
              {"basis_S", matrix_to_json(form.basis_S)},
              {"basis_E", matrix_to_json(form.basis_E)},
              {"blocks", std::move(blocks)}};
}

Json verdict_to_json(const EnvarianceVerdict& verdict) {
  Json out{{"v", kSchemaVersion},
           {"envariant", verdict.envariant},
           {"residual", verdict.residual},
           {"reduced_state_deviation", verdict.reduced_state_deviation},
           {"witness_verified", verdict.witness_verified}};
  out["witness"] = verdict.witness ? unitary_to_json(*verdict.witness) : Json(nullptr);
  Json merged = Json::array();
  for (const auto& b : verdict.merged_blocks) merged.push_back(block_to_json(b));
  out["merged_blocks"] = std::move(merged);
  return out;
}

Json constraint_to_json(const Constraint& c) {
  Json out{{"kind", kind_name(c.kind)}};
  switch (c.kind) {
    case ConstraintKind::Equality:
      out["a"] = c.labels.at(0).str();
      out["b"] = c.labels.at(1).str();
      break;
    case ConstraintKind::Normalization:
      out["labels"] = labels_to_json(c.labels);
      break;
    case ConstraintKind::Value:
      out["a"] = c.labels.at(0).str();
      out["value"] = rational_to_json(c.value);
      break;
    case ConstraintKind::Aggregate:
      out["a"] = c.labels.at(0).str();
      out["parts"] = labels_to_json(c.labels, 1);
      break;
  }
  out["rule"] = rule_name(c.rule);
  if (!c.provenance.trace.empty()) out["provenance"] = Json{{"trace", c.provenance.trace}, {"step", c.provenance.step}};
  if (!c.justification.empty()) out["justification"] = c.justification;
  return out;
}

Constraint constraint_from_json(const Json& j) {
  const Json& kind = field(j, "kind", "constraint");
  const Json& rule = field(j, "rule", "constraint");
  if (!kind.is_string() || !rule.is_string()) throw ValidationError("constraint kind and rule must be strings");
  const Rule r = parse_rule(rule.get<std::string>());
  const std::string k = kind.get<std::string>();
  auto label = [&](const char* key) {
    const Json& x = field(j, key, "constraint");
    if (!x.is_string()) throw ValidationError("constraint labels must be strings");
    return ProbabilityLabel::parse(x.get<std::string>());
  };
  Constraint c;
  if (k == "equality") {
    c = Constraint::equality(label("a"), label("b"), r);
  } else if (k == "normalization") {
    c = Constraint::normalization(labels_from_json(field(j, "labels", "constraint")));
    c.rule = r;
  } else if (k == "value") {
    c = Constraint::fixed_value(label("a"), rational_from_json(field(j, "value", "constraint")), r);
  } else if (k == "aggregate") {
    c = Constraint::aggregate(label("a"), labels_from_json(field(j, "parts", "constraint")), r);
  } else {
    throw ValidationError("unknown constraint kind '" + k + "'");
  }
  if (auto p = j.find("provenance"); p != j.end()) {
    c.provenance.trace = field(*p, "trace", "provenance").get<std::string>();
    c.provenance.step = static_cast<int>(integer(field(*p, "step", "provenance"), "provenance step"));
  }
  if (auto s = j.find("justification"); s != j.end() && s->is_string()) c.justification = s->get<std::string>();
  return c;
}

Json ledger_to_json(const ConstraintLedger& ledger) {
  Json cs = Json::array();
  for (const auto& c : ledger.constraints()) cs.push_back(constraint_to_json(c));
  return Json{{"v", kSchemaVersion}, {"constraints", std::move(cs)}};
}

ConstraintLedger ledger_from_json(const Json& j) {
  check_version(j, "ledger");
  const Json& cs = field(j, "constraints", "ledger");
  if (!cs.is_array()) throw ValidationError("ledger constraints must be an array");
  ConstraintLedger ledger;
  for (const auto& c : cs) ledger.add(constraint_from_json(c));
  return ledger;
}

Json trace_to_json(const ProtocolTrace& trace, const Ruleset& ruleset, const ConstraintLedger& ledger) {
  std::map<int, Json> by_step;
  Json unattached = Json::array();
  for (const auto& c : ledger.constraints()) {
    if (c.provenance.trace == trace.id && c.provenance.step >= 0 &&
        c.provenance.step < static_cast<int>(trace.steps.size())) {
      by_step[c.provenance.step].push_back(constraint_to_json(c));
    } else {
      unattached.push_back(constraint_to_json(c));
    }
  }
  Json steps = Json::array();
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& step = trace.steps[s];
    Json assertions = Json::array();
    for (const auto& a : step.assertions) assertions.push_back(assertion_to_json(a));
    auto it = by_step.find(static_cast<int>(s));
    steps.push_back(Json{{"state_id", step.state_id},
                         {"state", state_to_json(step.state)},
                         {"action", step.action},
                         {"assertions", std::move(assertions)},
                         {"constraints", it == by_step.end() ? Json::array() : std::move(it->second)}});
  }
  Json out{{"v", kSchemaVersion},
           {"id", trace.id},
           {"ruleset", ruleset_to_json(ruleset)},
           {"pair", Json::array({trace.pair.first, trace.pair.second})},
           {"frame",
            Json{{"coefficients", vector_to_json(trace.frame.coefficients)},
                 {"basis_S", matrix_to_json(trace.frame.basis_S)},
                 {"basis_E", matrix_to_json(trace.frame.basis_E)}}},
           {"block_local", trace.block_local},
           {"spectator_weight", trace.spectator_weight},
           {"outcome_map", trace.outcome_map},
           {"support_rank", trace.support_rank},
           {"steps", std::move(steps)}};
  if (!unattached.empty()) out["constraints"] = std::move(unattached);
  return out;
}

Json ruleset_to_json(const Ruleset& ruleset) {
  Json rules = Json::array();
  for (Rule r : ruleset.rules) rules.push_back(rule_name(r));
  return Json{{"name", ruleset.name},
              {"rules", std::move(rules)},
              {"env_requires_envariance", ruleset.env_requires_envariance},
              {"pedantic_requires_envariance", ruleset.pedantic_requires_envariance}};
}

Ruleset ruleset_from_json(const Json& j) {
  check_version(j, "ruleset");
  Ruleset out;
  if (auto base = j.find("base"); base != j.end()) {
    if (!base->is_string()) throw ValidationError("ruleset base must be a string");
    out = Ruleset::named(base->get<std::string>());
  }
  if (auto rules = j.find("rules"); rules != j.end()) {
    if (!rules->is_array()) throw ValidationError("ruleset rules must be an array");
    out.rules.clear();
    for (const auto& r : *rules) {
      if (!r.is_string()) throw ValidationError("rule names must be strings");
      out.rules.insert(parse_rule(r.get<std::string>()));
    }
  } else if (j.find("base") == j.end()) {
    throw ValidationError("ruleset needs 'rules' or 'base'");
  }
  if (auto n = j.find("name"); n != j.end() && n->is_string()) {
    out.name = n->get<std::string>();
  } else if (out.name.empty()) {
    out.name = "custom";
  }
  for (const char* key : {"env_requires_envariance", "pedantic_requires_envariance"}) {
    auto it = j.find(key);
    if (it == j.end()) continue;
    if (!it->is_boolean()) throw ValidationError(std::string("ruleset '") + key + "' must be a boolean");
    (std::string_view(key) == "env_requires_envariance" ? out.env_requires_envariance
                                                       : out.pedantic_requires_envariance) = it->get<bool>();
  }
  return out;
}

Json certificate_to_json(const DerivationCertificate& cert) {
  Json assignment = Json::object();
  for (const auto& [label, value] : cert.assignment) {
    if (value.value) {
      assignment[label.str()] = rational_to_json(*value.value);
    } else {
      assignment[label.str()] =
          Json{{"free", true}, {"lower", rational_to_json(value.lower)}, {"upper", rational_to_json(value.upper)}};
    }
  }
  Json entries = Json::array();
  for (const auto& e : cert.born_check.entries) {
    Json x{{"label", e.label.str()}, {"born", e.born}, {"deviation", e.deviation}};
    if (e.exact_born) {
      x["exact_born"] = rational_to_json(*e.exact_born);
      x["exact_match"] = e.exact_match;
    }
    entries.push_back(std::move(x));
  }
  Json conflict = Json::array();
  for (const auto& c : cert.conflict) conflict.push_back(constraint_to_json(c));

  Json out{{"v", kSchemaVersion},
           {"status", lower(status_name(cert.status))},
           {"ruleset", cert.ruleset},
           {"assignment", std::move(assignment)},
           {"justification", cert.justification}};
  if (!conflict.empty()) out["conflict"] = std::move(conflict);
  out["born_check"] = Json{{"max_abs_dev", cert.born_check.max_abs_dev},
                           {"exact_compared", cert.born_check.exact_compared},
                           {"exact_match", cert.born_check.exact_match},
                           {"entries", std::move(entries)}};
  out["exactness"] = cert.exactness.exact ? "exact" : "approximate";
  if (!cert.exactness.exact) out["epsilon"] = cert.exactness.epsilon;
  if (cert.approximant) {
    out["approximant"] = Json{{"counts", cert.approximant->counts}, {"total", cert.approximant->total}};
  }
  out["traces"] = cert.traces;
  out["notes"] = cert.notes;
  return out;
}

Json report_to_json(const SignallingReport& report) {
  return Json{{"v", kSchemaVersion},
              {"best_distance", report.best_distance},
              {"best_unitary", unitary_to_json(report.best_unitary)},
              {"remote_side", side_name(report.remote_side)},
              {"restarts", report.restarts},
              {"iterations", report.iterations},
              {"seed", report.seed},
              {"restart_best", report.restart_best},
              {"evaluations", report.evaluations}};
}

}  // namespace envlab
