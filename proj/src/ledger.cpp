#include "envlab/errors.hpp"
#include "envlab/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace envlab {

std::string ProbabilityLabel::str() const {
  std::ostringstream os;
  os << 'p' << side_name(side) << '(' << outcome << '|' << state_id << ')';
  return os.str();
}

ProbabilityLabel ProbabilityLabel::parse(std::string_view text) {
  auto fail = [&]() -> ProbabilityLabel {
    throw ValidationError("malformed probability label '" + std::string(text) + "'");
  };
  if (text.size() < 7 || text[0] != 'p' || text[2] != '(' || text.back() != ')') return fail();
  const auto bar = text.find('|');
  if (bar == std::string_view::npos || bar < 4) return fail();
  ProbabilityLabel label;
  label.side = parse_side(text.substr(1, 1));
  const std::string_view digits = text.substr(3, bar - 3);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), label.outcome);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || label.outcome < 0) return fail();
  label.state_id = std::string(text.substr(bar + 1, text.size() - bar - 2));
  if (label.state_id.empty()) return fail();
  return label;
}

std::string_view rule_name(Rule rule) {
  switch (rule) {
    case Rule::EnvEToS: return "ENV_E_TO_S";
    case Rule::EnvSToE: return "ENV_S_TO_E";
    case Rule::Pcp: return "PCP";
    case Rule::Pedantic: return "PEDANTIC";
    case Rule::FineGrain: return "FINE_GRAIN";
    case Rule::Norm: return "NORM";
  }
  return "?";
}

Rule parse_rule(std::string_view name) {
  for (Rule r : {Rule::EnvEToS, Rule::EnvSToE, Rule::Pcp, Rule::Pedantic, Rule::FineGrain, Rule::Norm}) {
    if (rule_name(r) == name) return r;
  }
  throw ValidationError("unknown rule '" + std::string(name) + "'");
}

std::string_view kind_name(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Equality: return "equality";
    case ConstraintKind::Normalization: return "normalization";
    case ConstraintKind::Value: return "value";
    case ConstraintKind::Aggregate: return "aggregate";
  }
  return "?";
}

Constraint Constraint::equality(ProbabilityLabel a, ProbabilityLabel b, Rule rule) {
  Constraint c;
  c.kind = ConstraintKind::Equality;
  c.labels = {std::move(a), std::move(b)};
  c.rule = rule;
  return c;
}

Constraint Constraint::normalization(std::vector<ProbabilityLabel> labels) {
  Constraint c;
  c.kind = ConstraintKind::Normalization;
  c.labels = std::move(labels);
  c.value = 1;
  c.rule = Rule::Norm;
  return c;
}

Constraint Constraint::fixed_value(ProbabilityLabel a, Rational value, Rule rule) {
  Constraint c;
  c.kind = ConstraintKind::Value;
  c.labels = {std::move(a)};
  c.value = std::move(value);
  c.rule = rule;
  return c;
}

Constraint Constraint::aggregate(ProbabilityLabel total, std::vector<ProbabilityLabel> parts, Rule rule) {
  Constraint c;
  c.kind = ConstraintKind::Aggregate;
  c.labels.push_back(std::move(total));
  for (auto& p : parts) c.labels.push_back(std::move(p));
  c.rule = rule;
  return c;
}

std::string Constraint::key() const {
  std::vector<std::string> names;
  for (const auto& l : labels) names.push_back(l.str());
  std::ostringstream os;
  os << kind_name(kind) << ':' << rule_name(rule) << ':';
  switch (kind) {
    case ConstraintKind::Equality:
    case ConstraintKind::Normalization:
      std::sort(names.begin(), names.end());
      break;
    case ConstraintKind::Aggregate:
      std::sort(names.begin() + 1, names.end());
      break;
    case ConstraintKind::Value:
      break;
  }
  for (const auto& n : names) os << n << ',';
  os << '=' << value.str();
  return os.str();
}

std::string Constraint::describe() const {
  std::ostringstream os;
  switch (kind) {
    case ConstraintKind::Equality:
      os << labels[0].str() << " = " << labels[1].str();
      break;
    case ConstraintKind::Normalization:
      for (std::size_t i = 0; i < labels.size(); ++i) os << (i ? " + " : "") << labels[i].str();
      os << " = 1";
      break;
    case ConstraintKind::Value:
      os << labels[0].str() << " = " << value.str();
      break;
    case ConstraintKind::Aggregate:
      os << labels[0].str() << " = ";
      for (std::size_t i = 1; i < labels.size(); ++i) os << (i > 1 ? " + " : "") << labels[i].str();
      break;
  }
  os << " [" << rule_name(rule) << ']';
  if (!provenance.trace.empty()) os << " (" << provenance.trace << " step " << provenance.step << ')';
  return os.str();
}

bool ConstraintLedger::add(Constraint c) {
  if (c.labels.empty()) throw ValidationError("constraint without labels");
  if (c.kind == ConstraintKind::Equality && c.labels.size() != 2) {
    throw ValidationError("equality constraints take two labels");
  }
  if (!keys_.insert(c.key()).second) return false;
  constraints_.push_back(std::move(c));
  return true;
}

void ConstraintLedger::merge(const ConstraintLedger& other) {
  for (const auto& c : other.constraints_) add(c);
}

std::size_t ConstraintLedger::count(ConstraintKind kind) const {
  return static_cast<std::size_t>(std::count_if(constraints_.begin(), constraints_.end(),
                                                [&](const Constraint& c) { return c.kind == kind; }));
}

std::set<ProbabilityLabel> ConstraintLedger::labels() const {
  std::set<ProbabilityLabel> out;
  for (const auto& c : constraints_) out.insert(c.labels.begin(), c.labels.end());
  return out;
}

bool ConstraintLedger::subset_of(const ConstraintLedger& other) const {
  return std::all_of(keys_.begin(), keys_.end(),
                     [&](const std::string& k) { return other.keys_.count(k) != 0; });
}

ConstraintLedger ConstraintLedger::without_rule(Rule rule) const {
  ConstraintLedger out;
  for (const auto& c : constraints_) {
    if (c.rule != rule) out.add(c);
  }
  return out;
}

Ruleset Ruleset::without(Rule rule) const {
  Ruleset r = *this;
  r.rules.erase(rule);
  r.name += "-without-" + std::string(rule_name(rule));
  return r;
}

Ruleset Ruleset::with(Rule rule) const {
  Ruleset r = *this;
  if (r.rules.insert(rule).second) r.name += "+" + std::string(rule_name(rule));
  return r;
}

Ruleset Ruleset::zurek() {
  return Ruleset{"zurek", {Rule::EnvSToE, Rule::Pedantic, Rule::Norm}};
}

Ruleset Ruleset::barnum() {
  return Ruleset{"barnum", {Rule::EnvEToS, Rule::EnvSToE, Rule::Pcp, Rule::Norm}};
}

Ruleset Ruleset::named(std::string_view name) {
  constexpr std::string_view sep = "-without-";
  const auto pos = name.find(sep);
  const std::string_view base = name.substr(0, pos);
  Ruleset r;
  if (base == "zurek") {
    r = zurek();
  } else if (base == "barnum") {
    r = barnum();
  } else {
    throw ValidationError("unknown ruleset '" + std::string(name) + "'");
  }
  std::string_view rest = pos == std::string_view::npos ? std::string_view{} : name.substr(pos);
  while (!rest.empty()) {
    rest.remove_prefix(sep.size());
    const auto next = rest.find(sep);
    r = r.without(parse_rule(rest.substr(0, next)));
    rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next);
  }
  return r;
}

}  // namespace envlab
