#pragma once

#include "envlab/config.hpp"
#include "envlab/protocol.hpp"
#include "envlab/rational.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace envlab {

// Squared amplitudes m_k / M. `counts` are kept as given; the gcd-reduced
// form is stored alongside.
struct RationalSpec {
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  std::vector<std::int64_t> reduced_counts;
  std::int64_t reduced_total = 0;

  explicit RationalSpec(std::vector<std::int64_t> counts);
  RationalSpec(std::vector<std::int64_t> counts, std::int64_t total);

  int branches() const { return static_cast<int>(counts.size()); }
  Rational weight(int k) const { return make_rational(counts[k], total); }
};

enum class DerivationStatus { Determined, Underdetermined, Inconsistent };

std::string_view status_name(DerivationStatus status);

struct LabelValue {
  std::optional<Rational> value;
  // Enclosure reported for labels the ledger leaves free.
  Rational lower = 0;
  Rational upper = 1;
};

struct BornEntry {
  ProbabilityLabel label;
  double born = 0.0;
  double deviation = 0.0;
  std::optional<Rational> exact_born;
  bool exact_match = false;
};

struct BornCheck {
  std::vector<BornEntry> entries;
  double max_abs_dev = 0.0;
  // True when every entry had an exact Born value to compare against.
  bool exact_compared = false;
  bool exact_match = false;
};

struct Exactness {
  bool exact = true;
  double epsilon = 0.0;
};

struct DerivationCertificate {
  DerivationStatus status = DerivationStatus::Underdetermined;
  std::map<ProbabilityLabel, LabelValue> assignment;
  std::vector<std::string> justification;
  // Best-effort conflicting subset when INCONSISTENT.
  std::vector<Constraint> conflict;
  BornCheck born_check;
  Exactness exactness;
  std::string ruleset;
  std::optional<RationalSpec> approximant;
  std::vector<std::string> notes;
  std::size_t traces = 0;

  std::optional<Rational> value(const ProbabilityLabel& label) const;
  std::optional<Rational> value(const std::string& label) const;
};

DerivationCertificate solve_ledger(const ConstraintLedger& ledger);

// Solves a ledger emitted from `trace` and checks the labels of its initial
// state against the Born rule in the trace frame.
DerivationCertificate certify_trace(const ProtocolTrace& trace, const ConstraintLedger& ledger,
                                    const Ruleset& ruleset, const Tolerances& tol = {});

struct DerivationOptions {
  Ruleset ruleset = Ruleset::barnum();
  Config config{};
  // Subsystem the fine-graining ancilla interacts with.
  Side ancilla_side = Side::E;
  // Largest bipartite dimension on which swap protocols are simulated on the
  // full state; above it they run block-local.
  std::size_t max_explicit_protocol_dim = 4096;
};

// Equal-amplitude rank-n derivation; labels refer to state "psi1".
DerivationCertificate derive_equal_case(int n, const DerivationOptions& options = {});

struct FineGrained {
  // Tripartite (S, E, C); the side that met the ancilla is padded to at
  // least M so it can hold M orthonormal branch vectors.
  PureState state;
  Side ancilla_side = Side::E;
  // blocks[i] lists the branch indices j in 0..M-1 split off count i.
  std::vector<std::vector<int>> blocks;
  // Source Schmidt frame with column i matched to count i.
  SchmidtFrame source_frame;
  // Bipartite regrouping (S C | E) or (S | E C) and its branch frame, in
  // which branch j is frame vector j on both sides.
  PureState bipartite;
  SchmidtFrame branch_frame;
  double reduced_state_deviation = 0.0;
  bool reduced_state_exact = false;
};

// Contiguous branch blocks of sizes m_k.
std::vector<std::vector<int>> fine_grain_blocks(const RationalSpec& spec);

// Source Schmidt frame with columns permuted so column i carries counts[i];
// checks alpha_i^2 against m_i / M.
SchmidtFrame matched_frame(const PureState& state, const RationalSpec& spec, const Tolerances& tol);

FineGrained fine_grain(const PureState& state, const RationalSpec& spec,
                       const DerivationOptions& options = {});

// Probabilities of the Schmidt branches; labels are p^S(i|psi) with i the
// index into spec.counts.
DerivationCertificate derive_rational(const PureState& state, const RationalSpec& spec,
                                      const DerivationOptions& options = {});

// Largest-remainder counts for `weights` (summing to 1), scanning M upward
// until every count is positive and max |m_k/M - w_k| < epsilon.
RationalSpec apportion(const std::vector<double>& weights, double epsilon, std::int64_t max_denominator);

// Counts read off an exact annotation whose amplitude matrix has at most one
// nonzero entry per row and column (rows in ascending order).
std::optional<RationalSpec> rational_spec_from_exact(const PureState& state);

DerivationCertificate derive_general(const PureState& state, double epsilon,
                                     const DerivationOptions& options = {});

}  // namespace envlab
