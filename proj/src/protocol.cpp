#include "envlab/protocol.hpp"

#include "envlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace envlab {

namespace {

constexpr double kSupportCutoff = 1e-10;

std::string pair_text(std::pair<int, int> p) {
  return std::to_string(p.first) + "," + std::to_string(p.second);
}

void validate_frame(const PureState& state, const SchmidtFrame& frame, const Tolerances& tol) {
  const int r = frame.rank();
  const CMatrix a = state.as_matrix();
  if (frame.basis_S.rows() != a.rows() || frame.basis_E.rows() != a.cols() || r > frame.basis_S.cols() ||
      r > frame.basis_E.cols()) {
    throw ValidationError("frame dimensions do not match the state");
  }
  const CMatrix us = frame.basis_S.leftCols(r);
  const CMatrix ue = frame.basis_E.leftCols(r);
  const CMatrix id = CMatrix::Identity(r, r);
  if ((us.adjoint() * us - id).cwiseAbs().maxCoeff() > tol.ortho ||
      (ue.adjoint() * ue - id).cwiseAbs().maxCoeff() > tol.ortho) {
    throw ValidationError("frame Schmidt vectors are not orthonormal");
  }
  const CMatrix rebuilt = us * frame.coefficients.cast<Complex>().asDiagonal() * ue.transpose();
  if ((rebuilt - a).cwiseAbs().maxCoeff() > tol.state) {
    throw ValidationError("frame is not a Schmidt frame of the initial state");
  }
}

// Monomial pairing of a block of frame coefficients; rows are the leading
// frame S indices.
void collect_pairs(const CMatrix& b, std::vector<std::pair<int, int>>& pairs, double& captured) {
  std::vector<int> col_used(static_cast<std::size_t>(b.cols()), 0);
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    int found = -1;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      if (std::abs(b(i, j)) <= kSupportCutoff) continue;
      if (found >= 0 || col_used[static_cast<std::size_t>(j)]) {
        throw PreconditionError("frame does not diagonalize the state up to a permutation");
      }
      found = static_cast<int>(j);
    }
    if (found >= 0) {
      col_used[static_cast<std::size_t>(found)] = 1;
      captured += std::norm(b(i, found));
      pairs.emplace_back(static_cast<int>(i), found);
    }
  }
}

}  // namespace

bool ProtocolTrace::assertions_pass() const {
  for (const auto& step : steps) {
    for (const auto& a : step.assertions) {
      if (!a.pass) return false;
    }
  }
  return true;
}

std::vector<std::pair<int, int>> schmidt_pairing(const PureState& state, const SchmidtFrame& frame,
                                                 const Tolerances& tol) {
  // Snapshots usually keep their S support inside the first rank() frame
  // vectors; if those rows already carry the full norm the rest are zero.
  const int r = frame.rank();
  const CMatrix a = state.as_matrix();
  std::vector<std::pair<int, int>> pairs;
  double captured = 0.0;
  if (r < frame.basis_S.cols()) {
    collect_pairs(frame.basis_S.leftCols(r).adjoint() * a * frame.basis_E.conjugate(), pairs, captured);
    if (std::abs(captured - 1.0) <= tol.norm) return pairs;
    pairs.clear();
    captured = 0.0;
  }
  collect_pairs(frame_coefficients(state, frame), pairs, captured);
  if (std::abs(captured - 1.0) > tol.norm) {
    throw PreconditionError("frame pairing does not capture the full state");
  }
  return pairs;
}

std::vector<Constraint> pcp_constraints(const PureState& state, const std::string& state_id,
                                        const std::optional<SchmidtFrame>& frame,
                                        const Tolerances& tol) {
  const SchmidtFrame f = frame ? *frame : schmidt_frame(schmidt_decompose(state, tol));
  std::vector<Constraint> out;
  for (const auto& [i, j] : schmidt_pairing(state, f, tol)) {
    Constraint c = Constraint::equality({Side::S, i, state_id}, {Side::E, j, state_id}, Rule::Pcp);
    c.justification =
        "perfect correlation: S outcome " + std::to_string(i) + " and E outcome " + std::to_string(j) +
        " belong to the same Schmidt term; whether or not S measures is immaterial to E's "
        "probability by no-signalling";
    out.push_back(std::move(c));
  }
  return out;
}

ProtocolTrace run_swap_protocol(const PureState& initial, std::pair<int, int> pair,
                                const ProtocolOptions& options, const Tolerances& tol) {
  if (!initial.is_bipartite()) throw ValidationError("swap protocol needs a bipartite state");
  ProtocolTrace trace;
  if (options.frame) {
    validate_frame(initial, *options.frame, tol);
    trace.frame = *options.frame;
  } else {
    trace.frame = schmidt_frame(schmidt_decompose(initial, tol));
  }
  const SchmidtFrame& frame = trace.frame;
  const auto [k, l] = pair;
  const int r = frame.rank();
  if (k < 0 || l < 0 || k >= r || l >= r || k == l) {
    throw PreconditionError("swap pair (" + pair_text(pair) + ") is not a pair of distinct Schmidt indices below rank " +
                            std::to_string(r));
  }
  const double gap = std::abs(frame.coefficients[k] - frame.coefficients[l]);
  if (!(gap < tol.spec)) {
    std::ostringstream os;
    os << "branches " << k << " and " << l << " are not envariantly swappable: coefficients differ by "
       << gap;
    throw PreconditionError(os.str());
  }

  trace.id = options.trace_id;
  trace.pair = pair;
  trace.support_rank = r;

  const LocalUnitary emma = branch_swap(frame, Side::E, k, l);
  const LocalUnitary stan = branch_swap(frame, Side::S, k, l);
  PureState psi1 = initial.with_label(options.initial_id);
  PureState psi2 = apply_local(psi1, emma, tol).with_label(options.swapped_id);
  PureState psi3 = apply_local(psi2, stan, tol).with_label(options.final_id);

  EnvarianceOptions env_options;
  env_options.build_witness = options.record_witness;
  EnvarianceVerdict verdict = is_envariant(psi1, emma, tol, env_options);
  Assertion env;
  env.kind = "envariance";
  env.pass = verdict.envariant && verdict.witness_verified;
  env.distance = verdict.residual;
  env.detail = "E swap of branches " + pair_text(pair) + " is undone by a unitary on S";
  env.witness = std::move(verdict.witness);

  const PhaseMatch match = states_equal_up_to_phase(psi3, psi1, tol.state);
  Assertion identity;
  identity.kind = "state_identity";
  identity.pass = match.equal;
  identity.distance = match.distance;
  identity.phase = match.phase;
  identity.detail = options.final_id + " == " + options.initial_id + " up to global phase";

  trace.steps.reserve(3);
  trace.steps.push_back({std::move(psi1), options.initial_id, "prepare", {}});
  trace.steps.push_back({std::move(psi2), options.swapped_id, "E swaps " + pair_text(pair), {}});
  trace.steps.back().assertions.push_back(std::move(env));
  trace.steps.push_back({std::move(psi3), options.final_id, "S swaps " + pair_text(pair), {}});
  trace.steps.back().assertions.push_back(std::move(identity));
  return trace;
}

ProtocolTrace run_swap_protocol_block(const RVector& coefficients, std::pair<int, int> pair,
                                      const ProtocolOptions& options, const Tolerances& tol) {
  const auto [k, l] = pair;
  const int r = static_cast<int>(coefficients.size());
  if (k < 0 || l < 0 || k >= r || l >= r || k == l) {
    throw PreconditionError("swap pair (" + pair_text(pair) + ") out of range");
  }
  const double weight = coefficients[k] * coefficients[k] + coefficients[l] * coefficients[l];
  const double scale = 1.0 / std::sqrt(weight);
  CMatrix block = CMatrix::Zero(2, 2);
  block(0, 0) = coefficients[k] * scale;
  block(1, 1) = coefficients[l] * scale;
  // Renormalize exactly so the block state passes validation at any weight.
  block /= block.norm();

  SchmidtFrame frame;
  frame.coefficients = RVector(2);
  frame.coefficients << std::abs(block(0, 0)), std::abs(block(1, 1));
  frame.basis_S = CMatrix::Identity(2, 2);
  frame.basis_E = CMatrix::Identity(2, 2);

  ProtocolOptions local = options;
  local.frame = frame;
  ProtocolTrace trace = run_swap_protocol(state_from_matrix(block, options.initial_id, tol), {0, 1}, local, tol);
  trace.pair = pair;
  trace.outcome_map = {k, l};
  trace.support_rank = r;
  trace.block_local = true;
  trace.spectator_weight = std::max(0.0, 1.0 - weight);
  return trace;
}

ConstraintLedger emit_constraints(const ProtocolTrace& trace, const Ruleset& ruleset,
                                  const Tolerances& tol) {
  if (trace.steps.size() != 3) throw ValidationError("swap trace must have three steps");
  if (!trace.assertions_pass()) {
    throw PreconditionError("trace " + trace.id + " has a failed assertion; no constraints emitted");
  }
  const bool envariant_action = std::any_of(
      trace.steps[1].assertions.begin(), trace.steps[1].assertions.end(),
      [](const Assertion& a) { return a.kind == "envariance" && a.pass; });
  const bool env_ok = envariant_action || !ruleset.env_requires_envariance;
  const bool pedantic_ok = envariant_action || !ruleset.pedantic_requires_envariance;

  auto global = [&](int i) {
    return trace.outcome_map.empty() ? i : trace.outcome_map.at(static_cast<std::size_t>(i));
  };
  const int k = trace.block_local ? 0 : trace.pair.first;
  const int l = trace.block_local ? 1 : trace.pair.second;

  const PureState& psi1 = trace.steps[0].state;
  const PureState& psi2 = trace.steps[1].state;
  const auto pairs1 = schmidt_pairing(psi1, trace.frame, tol);
  const auto pairs2 = schmidt_pairing(psi2, trace.frame, tol);
  auto e_partner = [](const std::vector<std::pair<int, int>>& pairs, int s) {
    for (const auto& [i, j] : pairs) {
      if (i == s) return j;
    }
    throw PreconditionError("S outcome has no Schmidt partner");
  };
  auto s_partner = [](const std::vector<std::pair<int, int>>& pairs, int e) {
    for (const auto& [i, j] : pairs) {
      if (j == e) return i;
    }
    throw PreconditionError("E outcome has no Schmidt partner");
  };
  const int e2 = e_partner(pairs2, k);   // E outcome sharing a term with S outcome k in psi2
  const int s1 = s_partner(pairs1, e2);  // S outcome sharing a term with that E outcome in psi1

  const std::string& id1 = trace.initial_id();
  const std::string& id2 = trace.swapped_id();
  ConstraintLedger ledger;
  bool uses_s = false;
  bool uses_e = false;
  auto emit = [&](Constraint c, int step, std::string why) {
    for (const auto& lab : c.labels) {
      (lab.side == Side::S ? uses_s : uses_e) = true;
    }
    c.provenance = {trace.id, step};
    c.justification = std::move(why);
    ledger.add(std::move(c));
  };

  if (ruleset.has(Rule::EnvEToS) && env_ok) {
    emit(Constraint::equality({Side::S, global(k), id1}, {Side::S, global(k), id2}, Rule::EnvEToS), 1,
         "no signalling E to S: the E swap is envariant and cannot change S's probabilities");
  }
  if (ruleset.has(Rule::Pcp)) {
    emit(Constraint::equality({Side::S, global(k), id2}, {Side::E, global(e2), id2}, Rule::Pcp), 1,
         "perfect correlation in " + id2 + ": Schmidt partners share one component");
  }
  if (ruleset.has(Rule::EnvSToE) && env_ok) {
    emit(Constraint::equality({Side::E, global(e2), id2}, {Side::E, global(e2), id1}, Rule::EnvSToE), 2,
         "no signalling S to E: the S swap maps " + id2 + " to " + trace.steps[2].state_id +
             ", identical to " + id1);
  }
  if (ruleset.has(Rule::Pcp)) {
    emit(Constraint::equality({Side::E, global(e2), id1}, {Side::S, global(s1), id1}, Rule::Pcp), 0,
         "perfect correlation in " + id1 + ": Schmidt partners share one component");
  }
  if (ruleset.has(Rule::Pedantic) && pedantic_ok) {
    emit(Constraint::equality({Side::E, global(k), id1}, {Side::E, global(l), id2}, Rule::Pedantic), 1,
         "pedantic assumption: swapping states relabels their probabilities");
  }
  if (ruleset.has(Rule::Norm)) {
    for (Side side : {Side::S, Side::E}) {
      if (!(side == Side::S ? uses_s : uses_e)) continue;
      std::vector<ProbabilityLabel> labels;
      for (int i = 0; i < trace.support_rank; ++i) labels.push_back({side, i, id1});
      emit(Constraint::normalization(std::move(labels)), 0,
           "normalization over the Schmidt support of " + id1 + " on " + std::string(side_name(side)));
    }
  }
  return ledger;
}

}  // namespace envlab
