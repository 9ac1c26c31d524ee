#pragma once

#include "envlab/envariance.hpp"
#include "envlab/rational.hpp"
#include "envlab/tensor.hpp"

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace envlab {

// Probability p^side(outcome | state_id); `outcome` indexes the protocol's
// reference frame on that side.
struct ProbabilityLabel {
  Side side = Side::S;
  int outcome = 0;
  std::string state_id;

  std::string str() const;  // "pS(0|psi1)"
  static ProbabilityLabel parse(std::string_view text);

  auto operator<=>(const ProbabilityLabel&) const = default;
};

enum class Rule { EnvEToS, EnvSToE, Pcp, Pedantic, FineGrain, Norm };

std::string_view rule_name(Rule rule);  // "ENV_E_TO_S", ...
Rule parse_rule(std::string_view name);

enum class ConstraintKind {
  Equality,       // labels[0] == labels[1]
  Normalization,  // sum(labels) == 1
  Value,          // labels[0] == value
  Aggregate,      // labels[0] == sum(labels[1..])
};

std::string_view kind_name(ConstraintKind kind);

struct Provenance {
  std::string trace;  // trace id, empty for constraints not tied to a trace
  int step = -1;
};

struct Constraint {
  ConstraintKind kind = ConstraintKind::Equality;
  std::vector<ProbabilityLabel> labels;
  Rational value = 0;
  Rule rule = Rule::Norm;
  Provenance provenance;
  std::string justification;

  static Constraint equality(ProbabilityLabel a, ProbabilityLabel b, Rule rule);
  static Constraint normalization(std::vector<ProbabilityLabel> labels);
  static Constraint fixed_value(ProbabilityLabel a, Rational value, Rule rule);
  static Constraint aggregate(ProbabilityLabel total, std::vector<ProbabilityLabel> parts, Rule rule);

  // Identity ignoring provenance and justification; equalities are unordered.
  std::string key() const;
  std::string describe() const;
};

class ConstraintLedger {
 public:
  // Returns false when an identical constraint is already present.
  bool add(Constraint c);
  void merge(const ConstraintLedger& other);

  const std::vector<Constraint>& constraints() const { return constraints_; }
  std::size_t size() const { return constraints_.size(); }
  std::size_t count(ConstraintKind kind) const;
  std::set<ProbabilityLabel> labels() const;
  bool subset_of(const ConstraintLedger& other) const;
  ConstraintLedger without_rule(Rule rule) const;

 private:
  std::vector<Constraint> constraints_;
  std::set<std::string> keys_;
};

struct Ruleset {
  std::string name;
  std::set<Rule> rules;
  // Emit ENV constraints only for actions the trace verified as envariant.
  bool env_requires_envariance = true;
  // Emit PEDANTIC relabelings only for envariant swaps.
  bool pedantic_requires_envariance = true;

  bool has(Rule rule) const { return rules.count(rule) != 0; }
  Ruleset without(Rule rule) const;
  Ruleset with(Rule rule) const;

  static Ruleset zurek();
  static Ruleset barnum();
  // "zurek", "barnum", or "<base>-without-<RULE>[-without-<RULE>...]".
  static Ruleset named(std::string_view name);
};

struct Assertion {
  std::string kind;  // "state_identity" | "envariance"
  bool pass = false;
  double distance = 0.0;
  double phase = 0.0;
  std::string detail;
  std::optional<LocalUnitary> witness;
};

struct ProtocolStep {
  PureState state;
  std::string state_id;
  std::string action;
  std::vector<Assertion> assertions;
};

struct ProtocolTrace {
  std::string id;
  std::pair<int, int> pair{0, 1};
  SchmidtFrame frame;
  std::vector<ProtocolStep> steps;
  // Maps frame indices of the simulated snapshots to outcome indices of the
  // full state. Identity for full simulations; {k, l} for block-local ones.
  std::vector<int> outcome_map;
  // Number of support outcomes of the full initial state (for NORM).
  int support_rank = 0;
  // Block-local simulation: snapshots hold only the two swapped branches,
  // renormalized; the remaining weight is untouched by both swaps.
  bool block_local = false;
  double spectator_weight = 0.0;

  const std::string& initial_id() const { return steps.at(0).state_id; }
  const std::string& swapped_id() const { return steps.at(1).state_id; }
  bool assertions_pass() const;
};

struct ProtocolOptions {
  std::string trace_id = "swap";
  std::string initial_id = "psi1";
  std::string swapped_id = "psi2";
  std::string final_id = "psi3";
  // Schmidt frame to run in; defaults to the canonical one of the state.
  std::optional<SchmidtFrame> frame;
  // Keep the envariance witness in the trace. Without it the check still
  // runs but the dense witness matrix is never formed.
  bool record_witness = true;
};

ProtocolTrace run_swap_protocol(const PureState& initial, std::pair<int, int> pair,
                                const ProtocolOptions& options = {}, const Tolerances& tol = {});

// Runs the swap of branches k, l of a state with the given Schmidt
// coefficients on the two-branch block only.
ProtocolTrace run_swap_protocol_block(const RVector& coefficients, std::pair<int, int> pair,
                                      const ProtocolOptions& options = {},
                                      const Tolerances& tol = {});

ConstraintLedger emit_constraints(const ProtocolTrace& trace, const Ruleset& ruleset,
                                  const Tolerances& tol = {});

// p^S(i|state) = p^E(j|state) for each Schmidt term sigma_i (x) eps_j of the
// state, with indices taken in `frame`; the frame must diagonalize the state
// up to a permutation. Without a frame the canonical Schmidt frame is used.
std::vector<Constraint> pcp_constraints(const PureState& state, const std::string& state_id,
                                        const std::optional<SchmidtFrame>& frame = std::nullopt,
                                        const Tolerances& tol = {});

// (S index, E index) Schmidt pairs of `state` in `frame`.
std::vector<std::pair<int, int>> schmidt_pairing(const PureState& state, const SchmidtFrame& frame,
                                                 const Tolerances& tol = {});

}  // namespace envlab
