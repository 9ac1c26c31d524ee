#include "envlab/derivation.hpp"

#include "envlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace envlab {

RationalSpec::RationalSpec(std::vector<std::int64_t> c)
    : RationalSpec(c, std::accumulate(c.begin(), c.end(), std::int64_t{0})) {}

RationalSpec::RationalSpec(std::vector<std::int64_t> c, std::int64_t m) : counts(std::move(c)), total(m) {
  if (counts.empty()) throw ValidationError("rational spec needs at least one count");
  std::int64_t sum = 0;
  std::int64_t g = 0;
  for (auto x : counts) {
    if (x <= 0) throw ValidationError("rational spec counts must be positive, got " + std::to_string(x));
    sum += x;
    g = std::gcd(g, x);
  }
  if (sum != total) {
    throw ValidationError("rational spec counts sum to " + std::to_string(sum) + ", not " + std::to_string(total));
  }
  reduced_total = total / g;
  for (auto x : counts) reduced_counts.push_back(x / g);
}

std::string_view status_name(DerivationStatus status) {
  switch (status) {
    case DerivationStatus::Determined: return "DETERMINED";
    case DerivationStatus::Underdetermined: return "UNDERDETERMINED";
    case DerivationStatus::Inconsistent: return "INCONSISTENT";
  }
  return "?";
}

std::optional<Rational> DerivationCertificate::value(const ProbabilityLabel& label) const {
  const auto it = assignment.find(label);
  if (it == assignment.end()) return std::nullopt;
  return it->second.value;
}

std::optional<Rational> DerivationCertificate::value(const std::string& label) const {
  return value(ProbabilityLabel::parse(label));
}

// ---------------------------------------------------------------------------
// Solver

namespace {

struct UnionFind {
  std::vector<int> parent;

  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct Row {
  std::vector<Rational> coef;
  Rational rhs;
  std::vector<int> sources;  // sorted constraint indices
};

std::vector<int> merged(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool all_zero(const std::vector<Rational>& v) {
  return std::all_of(v.begin(), v.end(), [](const Rational& x) { return x == 0; });
}

}  // namespace

DerivationCertificate solve_ledger(const ConstraintLedger& ledger) {
  const auto& cons = ledger.constraints();
  DerivationCertificate cert;

  std::vector<ProbabilityLabel> labels;
  std::map<ProbabilityLabel, int> index;
  for (const auto& c : cons) {
    for (const auto& l : c.labels) {
      if (index.emplace(l, static_cast<int>(labels.size())).second) labels.push_back(l);
    }
  }
  UnionFind uf(labels.size());
  for (const auto& c : cons) {
    if (c.kind == ConstraintKind::Equality) uf.unite(index.at(c.labels[0]), index.at(c.labels[1]));
  }
  std::map<int, int> class_of_root;
  std::vector<int> cls(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int root = uf.find(static_cast<int>(i));
    const auto it = class_of_root.emplace(root, static_cast<int>(class_of_root.size())).first;
    cls[i] = it->second;
  }
  const std::size_t nvars = class_of_root.size();

  std::vector<Row> rows;
  for (std::size_t ci = 0; ci < cons.size(); ++ci) {
    const Constraint& c = cons[ci];
    if (c.kind == ConstraintKind::Equality) continue;
    Row row;
    row.coef.assign(nvars, Rational(0));
    row.sources = {static_cast<int>(ci)};
    switch (c.kind) {
      case ConstraintKind::Normalization:
        for (const auto& l : c.labels) row.coef[cls[index.at(l)]] += 1;
        row.rhs = 1;
        break;
      case ConstraintKind::Value:
        row.coef[cls[index.at(c.labels[0])]] += 1;
        row.rhs = c.value;
        break;
      case ConstraintKind::Aggregate:
        row.coef[cls[index.at(c.labels[0])]] += 1;
        for (std::size_t i = 1; i < c.labels.size(); ++i) row.coef[cls[index.at(c.labels[i])]] -= 1;
        row.rhs = 0;
        break;
      case ConstraintKind::Equality:
        break;
    }
    rows.push_back(std::move(row));
  }

  // Reduced row echelon form in exact arithmetic.
  std::vector<int> pivot_row_of(nvars, -1);
  std::size_t next = 0;
  for (std::size_t col = 0; col < nvars && next < rows.size(); ++col) {
    std::size_t p = next;
    while (p < rows.size() && rows[p].coef[col] == 0) ++p;
    if (p == rows.size()) continue;
    std::swap(rows[next], rows[p]);
    Row& piv = rows[next];
    const Rational scale = piv.coef[col];
    if (scale != 1) {
      for (auto& x : piv.coef) x /= scale;
      piv.rhs /= scale;
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r == next || rows[r].coef[col] == 0) continue;
      const Rational f = rows[r].coef[col];
      for (std::size_t j = 0; j < nvars; ++j) {
        if (piv.coef[j] != 0) rows[r].coef[j] -= f * piv.coef[j];
      }
      rows[r].rhs -= f * piv.rhs;
      rows[r].sources = merged(rows[r].sources, piv.sources);
    }
    pivot_row_of[col] = static_cast<int>(next);
    ++next;
  }

  // Best-effort conflict: the source rows of the contradiction plus the
  // equalities tying together the classes they mention.
  auto conflict_from = [&](const std::vector<int>& sources) {
    std::set<int> classes;
    for (int s : sources) {
      for (const auto& l : cons[s].labels) classes.insert(cls[index.at(l)]);
    }
    std::vector<int> picked = sources;
    for (std::size_t ci = 0; ci < cons.size(); ++ci) {
      if (cons[ci].kind == ConstraintKind::Equality && classes.count(cls[index.at(cons[ci].labels[0])])) {
        picked.push_back(static_cast<int>(ci));
      }
    }
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    std::vector<Constraint> out;
    for (int i : picked) out.push_back(cons[i]);
    return out;
  };

  for (const auto& row : rows) {
    if (all_zero(row.coef) && row.rhs != 0) {
      cert.status = DerivationStatus::Inconsistent;
      cert.conflict = conflict_from(row.sources);
      cert.justification.push_back("contradiction: the constraints below imply 0 = " + to_string(row.rhs));
      for (const auto& c : cert.conflict) cert.justification.push_back(c.describe());
      for (const auto& l : labels) cert.assignment[l] = LabelValue{};
      return cert;
    }
  }

  std::vector<std::optional<Rational>> class_value(nvars);
  for (std::size_t col = 0; col < nvars; ++col) {
    const int pr = pivot_row_of[col];
    if (pr < 0) continue;
    const Row& row = rows[static_cast<std::size_t>(pr)];
    bool alone = true;
    for (std::size_t j = 0; j < nvars && alone; ++j) {
      if (j != col && row.coef[j] != 0) alone = false;
    }
    if (!alone) continue;
    if (row.rhs < 0 || row.rhs > 1) {
      cert.status = DerivationStatus::Inconsistent;
      cert.conflict = conflict_from(row.sources);
      cert.justification.push_back("contradiction: a probability is forced to " + to_string(row.rhs));
      for (const auto& c : cert.conflict) cert.justification.push_back(c.describe());
      for (const auto& l : labels) cert.assignment[l] = LabelValue{};
      return cert;
    }
    class_value[col] = row.rhs;
  }

  bool all_determined = true;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    LabelValue v;
    v.value = class_value[cls[i]];
    if (v.value) {
      v.lower = *v.value;
      v.upper = *v.value;
    } else {
      all_determined = false;
    }
    cert.assignment[labels[i]] = v;
  }
  cert.status = all_determined ? DerivationStatus::Determined : DerivationStatus::Underdetermined;

  // Substitute back into every constraint whose labels are all determined.
  for (const auto& c : cons) {
    std::vector<Rational> vals;
    for (const auto& l : c.labels) {
      const auto& v = cert.assignment.at(l).value;
      if (!v) break;
      vals.push_back(*v);
    }
    if (vals.size() != c.labels.size()) continue;
    bool ok = true;
    switch (c.kind) {
      case ConstraintKind::Equality: ok = vals[0] == vals[1]; break;
      case ConstraintKind::Normalization:
        ok = std::accumulate(vals.begin(), vals.end(), Rational(0)) == 1;
        break;
      case ConstraintKind::Value: ok = vals[0] == c.value; break;
      case ConstraintKind::Aggregate:
        ok = vals[0] == std::accumulate(vals.begin() + 1, vals.end(), Rational(0));
        break;
    }
    if (!ok) throw Error("solver produced an assignment violating " + c.describe());
  }

  for (const auto& c : cons) cert.justification.push_back(c.describe());
  std::map<int, std::vector<std::string>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[cls[i]].push_back(labels[i].str());
  for (const auto& [k, names] : members) {
    std::ostringstream os;
    os << "=> ";
    const std::size_t shown = std::min<std::size_t>(names.size(), 8);
    for (std::size_t i = 0; i < shown; ++i) os << (i ? " = " : "") << names[i];
    if (names.size() > shown) os << " = ... (" << names.size() << " labels)";
    if (class_value[static_cast<std::size_t>(k)]) {
      os << " = " << to_string(*class_value[static_cast<std::size_t>(k)]);
    } else {
      os << " free in [0, 1]";
    }
    cert.justification.push_back(os.str());
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Derivations

namespace {

struct BornValue {
  double born = 0.0;
  std::optional<Rational> exact;
};

void attach_born_check(DerivationCertificate& cert, const std::string& state_id,
                       const std::function<BornValue(const ProbabilityLabel&)>& oracle) {
  BornCheck check;
  bool all_exact = true;
  bool all_match = true;
  for (const auto& [label, v] : cert.assignment) {
    if (label.state_id != state_id || !v.value) continue;
    const BornValue b = oracle(label);
    BornEntry e;
    e.label = label;
    e.born = b.born;
    e.deviation = std::abs(to_double(*v.value) - b.born);
    e.exact_born = b.exact;
    e.exact_match = b.exact && *b.exact == *v.value;
    if (!b.exact) all_exact = false;
    if (!e.exact_match) all_match = false;
    check.max_abs_dev = std::max(check.max_abs_dev, e.deviation);
    check.entries.push_back(std::move(e));
  }
  check.exact_compared = all_exact && !check.entries.empty();
  check.exact_match = check.exact_compared && all_match;
  if (check.exact_match) check.max_abs_dev = 0.0;
  cert.born_check = std::move(check);
}

struct EqualRun {
  ConstraintLedger ledger;
  std::size_t traces = 0;
  bool block_local = false;
};

// Swap protocols over the pairs (0, k) of an equal-amplitude rank-n state,
// either on `state` in `frame` or block-local. State ids are prefix + "1" for
// the initial state and prefix + "2_0_k" for the swapped snapshots.
EqualRun equal_case_ledger(int n, const std::string& prefix, const PureState* state,
                           const SchmidtFrame* frame, const Ruleset& ruleset, const Tolerances& tol) {
  EqualRun run;
  run.block_local = state == nullptr;
  const std::string id1 = prefix + "1";
  if (n == 1) {
    if (ruleset.has(Rule::Norm)) {
      for (Side side : {Side::S, Side::E}) {
        Constraint c = Constraint::normalization({{side, 0, id1}});
        c.justification = "a single outcome carries all the probability";
        run.ledger.add(std::move(c));
      }
    }
    return run;
  }
  const RVector coefficients = RVector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (int k = 1; k < n; ++k) {
    ProtocolOptions opts;
    opts.trace_id = "swap_0_" + std::to_string(k);
    opts.record_witness = false;
    opts.initial_id = id1;
    opts.swapped_id = prefix + "2_0_" + std::to_string(k);
    opts.final_id = prefix + "3_0_" + std::to_string(k);
    ProtocolTrace trace;
    if (state) {
      opts.frame = *frame;
      trace = run_swap_protocol(*state, {0, k}, opts, tol);
    } else {
      trace = run_swap_protocol_block(coefficients, {0, k}, opts, tol);
    }
    run.ledger.merge(emit_constraints(trace, ruleset, tol));
    ++run.traces;
  }
  return run;
}

std::size_t explicit_cap(const DerivationOptions& o) {
  return std::min(o.max_explicit_protocol_dim, o.config.max_total_dim);
}

bool has_phases(const PureState& state) {
  if (!state.exact()) return false;
  const auto& ex = *state.exact();
  for (std::size_t i = 0; i < ex.num.size(); ++i) {
    if (ex.num[i] != 0 && ex.signs[i] < 0) return true;
  }
  return false;
}

}  // namespace

DerivationCertificate certify_trace(const ProtocolTrace& trace, const ConstraintLedger& ledger,
                                    const Ruleset& ruleset, const Tolerances& tol) {
  if (trace.block_local) throw PreconditionError("Born check needs a trace of the full state");
  DerivationCertificate cert = solve_ledger(ledger);
  cert.ruleset = ruleset.name;
  cert.traces = 1;
  const PureState& initial = trace.steps.at(0).state;
  attach_born_check(cert, trace.initial_id(), [&](const ProbabilityLabel& l) {
    const CVector v = trace.frame.basis(l.side).col(l.outcome);
    return BornValue{born_probability(initial, l.side, v), exact_born_probability(initial, l.side, v, tol.ortho)};
  });
  return cert;
}

DerivationCertificate derive_equal_case(int n, const DerivationOptions& options) {
  if (n < 1) throw ValidationError("equal case needs N >= 1");
  const Tolerances& tol = options.config.tol;
  const int d = std::max(n, 2);
  const bool explicit_run = static_cast<std::size_t>(d) * d <= explicit_cap(options);

  DerivationCertificate cert;
  std::optional<PureState> state;
  std::optional<SchmidtFrame> frame;
  EqualRun run;
  if (explicit_run) {
    state = equal_amplitude_state(n, "psi1", options.config.max_total_dim);
    frame = schmidt_frame(schmidt_decompose(*state, tol));
    run = equal_case_ledger(n, "psi", &*state, &*frame, options.ruleset, tol);
  } else {
    run = equal_case_ledger(n, "psi", nullptr, nullptr, options.ruleset, tol);
    cert.notes.push_back("swap protocols simulated block-local: rank " + std::to_string(n) +
                         " exceeds the explicit simulation cap");
  }
  const DerivationCertificate solved = solve_ledger(run.ledger);
  cert.status = solved.status;
  cert.assignment = solved.assignment;
  cert.justification = solved.justification;
  cert.conflict = solved.conflict;
  cert.ruleset = options.ruleset.name;
  cert.traces = run.traces;

  attach_born_check(cert, "psi1", [&](const ProbabilityLabel& l) {
    if (l.outcome >= n) return BornValue{0.0, Rational(0)};
    if (!state) return BornValue{1.0 / n, make_rational(1, n)};
    const CVector v = frame->basis(l.side).col(l.outcome);
    return BornValue{born_probability(*state, l.side, v), exact_born_probability(*state, l.side, v, tol.ortho)};
  });
  return cert;
}

std::vector<std::vector<int>> fine_grain_blocks(const RationalSpec& spec) {
  std::vector<std::vector<int>> blocks;
  int next = 0;
  for (auto m : spec.counts) {
    std::vector<int> b(static_cast<std::size_t>(m));
    std::iota(b.begin(), b.end(), next);
    next += static_cast<int>(m);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

SchmidtFrame matched_frame(const PureState& state, const RationalSpec& spec, const Tolerances& tol) {
  if (!state.is_bipartite()) throw ValidationError("rational derivation needs a bipartite state");
  const SchmidtFrame frame = schmidt_frame(schmidt_decompose(state, tol));
  const int r = frame.rank();
  if (r != spec.branches()) {
    throw ValidationError("state has Schmidt rank " + std::to_string(r) + " but the rational spec has " +
                          std::to_string(spec.branches()) + " counts");
  }
  // Schmidt order is descending; give the largest counts the largest
  // coefficients, ties kept in spec order.
  std::vector<int> by_count(static_cast<std::size_t>(r));
  std::iota(by_count.begin(), by_count.end(), 0);
  std::stable_sort(by_count.begin(), by_count.end(),
                   [&](int a, int b) { return spec.counts[a] > spec.counts[b]; });
  SchmidtFrame out = frame;
  for (int pos = 0; pos < r; ++pos) {
    const int i = by_count[static_cast<std::size_t>(pos)];
    const double want = static_cast<double>(spec.counts[i]) / static_cast<double>(spec.total);
    const double have = frame.coefficients[pos] * frame.coefficients[pos];
    if (std::abs(want - have) > tol.state) {
      std::ostringstream os;
      os << "squared Schmidt coefficient " << have << " does not match " << spec.counts[i] << "/" << spec.total;
      throw ValidationError(os.str());
    }
    out.coefficients[i] = frame.coefficients[pos];
    out.basis_S.col(i) = frame.basis_S.col(pos);
    out.basis_E.col(i) = frame.basis_E.col(pos);
  }
  return out;
}

FineGrained fine_grain(const PureState& state, const RationalSpec& spec, const DerivationOptions& options) {
  const Tolerances& tol = options.config.tol;
  if (has_phases(state)) {
    throw PreconditionError("phases present: remove them with phase_scrub_witness before fine-graining");
  }
  if (options.ancilla_side == Side::C) throw ValidationError("ancilla must attach to S or E");
  const SchmidtFrame src = matched_frame(state, spec, tol);
  const auto blocks = fine_grain_blocks(spec);
  const int m = static_cast<int>(spec.total);
  const int ds = state.dim(Side::S);
  const int de = state.dim(Side::E);
  const bool on_e = options.ancilla_side == Side::E;
  const int ds2 = on_e ? ds : std::max(ds, m);
  const int de2 = on_e ? std::max(de, m) : de;
  const std::size_t total = static_cast<std::size_t>(ds2) * de2 * m;
  if (total > options.config.max_total_dim) {
    throw ValidationError("fine-grained state of dimension " + std::to_string(total) +
                          " exceeds the cap " + std::to_string(options.config.max_total_dim));
  }

  // Branch j keeps the untouched side's Schmidt vector of its block and puts
  // |j> on both the padded side and the ancilla.
  const double amp = 1.0 / std::sqrt(static_cast<double>(m));
  CVector phi = CVector::Zero(static_cast<Eigen::Index>(total));
  std::vector<int> branch_of(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (int j : blocks[i]) branch_of[static_cast<std::size_t>(j)] = static_cast<int>(i);
  }
  auto at = [&](int s, int e, int c) { return (static_cast<Eigen::Index>(s) * de2 + e) * m + c; };
  for (int j = 0; j < m; ++j) {
    const int i = branch_of[static_cast<std::size_t>(j)];
    if (on_e) {
      for (int s = 0; s < ds; ++s) phi[at(s, j, j)] = amp * src.basis_S(s, i);
    } else {
      for (int e = 0; e < de; ++e) phi[at(j, e, j)] = amp * src.basis_E(e, i);
    }
  }
  PureState tri({ds2, de2, m}, std::move(phi), "phi1", tol, options.config.max_total_dim);

  // Exact annotation when each kept Schmidt vector is computational.
  const CMatrix& kept = on_e ? src.basis_S : src.basis_E;
  bool computational = true;
  std::vector<Eigen::Index> peak(blocks.size());
  std::vector<int> sign(blocks.size(), 1);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const double top = kept.col(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff(&peak[i]);
    const Complex z = kept(peak[i], static_cast<Eigen::Index>(i));
    if (std::abs(top - 1.0) > tol.ortho || std::abs(z.imag()) > tol.ortho) computational = false;
    sign[i] = z.real() < 0 ? -1 : 1;
  }
  if (computational) {
    ExactAmplitudes ex;
    ex.den = m;
    ex.num.assign(total, 0);
    ex.signs.assign(total, 1);
    for (int j = 0; j < m; ++j) {
      const auto i = static_cast<std::size_t>(branch_of[static_cast<std::size_t>(j)]);
      const int p = static_cast<int>(peak[i]);
      const auto idx = static_cast<std::size_t>(on_e ? at(p, j, j) : at(j, p, j));
      ex.num[idx] = 1;
      ex.signs[idx] = sign[i];
    }
    tri = tri.with_exact(std::move(ex), tol);
  }

  FineGrained out{tri, options.ancilla_side, blocks, src, tri, {}, 0.0, false};

  // Reduced state of the untouched side.
  const Side keep = on_e ? Side::S : Side::E;
  const CMatrix before = partial_trace(state, keep, tol).matrix();
  CMatrix after = partial_trace(tri, keep, tol).matrix();
  if (!on_e) after = after.topLeftCorner(before.rows(), before.cols()).eval();
  out.reduced_state_deviation = (before - after).cwiseAbs().maxCoeff();
  if (state.exact() && tri.exact()) {
    bool same = out.reduced_state_deviation <= tol.state;
    for (int a = 0; a < before.rows() && same; ++a) {
      same = exact_born_probability(state, keep, a) == exact_born_probability(tri, keep, a);
    }
    out.reduced_state_exact = same;
  }

  PureState bip = regroup(tri, on_e ? std::vector<Side>{Side::S, Side::C} : std::vector<Side>{Side::S},
                          options.config.max_total_dim);
  out.bipartite = bip.with_label("phi1");

  SchmidtFrame bf;
  bf.coefficients = RVector::Constant(m, amp);
  if (on_e) {
    CMatrix x = CMatrix::Zero(static_cast<Eigen::Index>(ds) * m, m);
    for (int j = 0; j < m; ++j) {
      const auto i = static_cast<Eigen::Index>(branch_of[static_cast<std::size_t>(j)]);
      for (int s = 0; s < ds; ++s) x(static_cast<Eigen::Index>(s) * m + j, j) = src.basis_S(s, i);
    }
    bf.basis_S = complete_basis(x);
    bf.basis_E = CMatrix::Identity(de2, de2);
  } else {
    CMatrix y = CMatrix::Zero(static_cast<Eigen::Index>(de) * m, m);
    for (int j = 0; j < m; ++j) {
      const auto i = static_cast<Eigen::Index>(branch_of[static_cast<std::size_t>(j)]);
      for (int e = 0; e < de; ++e) y(static_cast<Eigen::Index>(e) * m + j, j) = src.basis_E(e, i);
    }
    bf.basis_S = CMatrix::Identity(ds2, ds2);
    bf.basis_E = complete_basis(y);
  }
  out.branch_frame = std::move(bf);
  return out;
}

DerivationCertificate derive_rational(const PureState& state, const RationalSpec& spec,
                                      const DerivationOptions& options) {
  if (!state.is_bipartite()) throw ValidationError("rational derivation needs a bipartite state");
  if (has_phases(state)) {
    throw PreconditionError("phases present: remove them with phase_scrub_witness before fine-graining");
  }
  const Tolerances& tol = options.config.tol;
  const int m = static_cast<int>(spec.total);
  const bool on_e = options.ancilla_side != Side::S;
  // Side whose probabilities survive the ancilla interaction.
  const Side coarse = on_e ? Side::S : Side::E;
  const int ds = state.dim(Side::S);
  const int de = state.dim(Side::E);
  const std::size_t tri_dim = static_cast<std::size_t>(on_e ? ds : std::max(ds, m)) *
                              static_cast<std::size_t>(on_e ? std::max(de, m) : de) * m;

  DerivationCertificate cert;
  Ruleset rules = options.ruleset.with(Rule::FineGrain);
  cert.ruleset = rules.name;

  SchmidtFrame src;
  EqualRun run;
  if (tri_dim <= options.config.max_total_dim) {
    FineGrained fg = fine_grain(state, spec, options);
    src = fg.source_frame;
    if (fg.reduced_state_deviation > tol.state) {
      throw Error("fine-graining changed the reduced state of the untouched side");
    }
    if (fg.bipartite.total_dim() <= explicit_cap(options)) {
      run = equal_case_ledger(m, "phi", &fg.bipartite, &fg.branch_frame, options.ruleset, tol);
    } else {
      run = equal_case_ledger(m, "phi", nullptr, nullptr, options.ruleset, tol);
      cert.notes.push_back("swap protocols on the fine-grained state simulated block-local");
    }
  } else {
    src = matched_frame(state, spec, tol);
    run = equal_case_ledger(m, "phi", nullptr, nullptr, options.ruleset, tol);
    cert.notes.push_back("fine-grained state of dimension " + std::to_string(tri_dim) +
                         " not built; branch map applied structurally and protocols run block-local");
  }

  ConstraintLedger ledger = run.ledger;
  const auto blocks = fine_grain_blocks(spec);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::vector<ProbabilityLabel> parts;
    for (int j : blocks[i]) parts.push_back({coarse, j, "phi1"});
    Constraint c = Constraint::aggregate({coarse, static_cast<int>(i), "psi"}, std::move(parts), Rule::FineGrain);
    c.provenance = {"fine_grain", 0};
    c.justification = "outcome " + std::to_string(i) + " of psi is the union of its fine-grained branches; "
                      "the ancilla touched only the other side, so these probabilities are unchanged";
    ledger.add(std::move(c));
  }
  if (rules.has(Rule::Pcp)) {
    for (auto& c : pcp_constraints(state, "psi", src, tol)) ledger.add(std::move(c));
  }

  const DerivationCertificate solved = solve_ledger(ledger);
  cert.status = solved.status;
  cert.assignment = solved.assignment;
  cert.justification = solved.justification;
  cert.conflict = solved.conflict;
  cert.traces = run.traces;
  attach_born_check(cert, "psi", [&](const ProbabilityLabel& l) {
    const CVector v = src.basis(l.side).col(l.outcome);
    return BornValue{born_probability(state, l.side, v), exact_born_probability(state, l.side, v, tol.ortho)};
  });
  return cert;
}

RationalSpec apportion(const std::vector<double>& weights, double epsilon, std::int64_t max_denominator) {
  if (weights.empty()) throw ValidationError("nothing to apportion");
  if (!(epsilon > 0.0)) throw DerivationError("epsilon = 0 is unachievable with rational approximants");
  const std::size_t r = weights.size();
  std::vector<std::int64_t> counts(r);
  std::vector<std::size_t> order(r);
  for (std::int64_t m = static_cast<std::int64_t>(r); m <= max_denominator; ++m) {
    std::int64_t assigned = 0;
    std::vector<double> rem(r);
    for (std::size_t k = 0; k < r; ++k) {
      const double t = weights[k] * static_cast<double>(m);
      counts[k] = static_cast<std::int64_t>(std::floor(t));
      rem[k] = t - std::floor(t);
      assigned += counts[k];
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t i = 0; assigned < m; ++i, ++assigned) ++counts[order[i % r]];
    bool ok = true;
    for (std::size_t k = 0; k < r && ok; ++k) {
      ok = counts[k] > 0 &&
           std::abs(static_cast<double>(counts[k]) / static_cast<double>(m) - weights[k]) < epsilon;
    }
    if (ok) return RationalSpec(counts, m);
  }
  std::ostringstream os;
  os << "epsilon " << epsilon << " is unachievable with denominators up to " << max_denominator;
  throw DerivationError(os.str());
}

std::optional<RationalSpec> rational_spec_from_exact(const PureState& state) {
  if (!state.is_bipartite() || !state.exact()) return std::nullopt;
  const auto& ex = *state.exact();
  const int ds = state.dim(Side::S);
  const int de = state.dim(Side::E);
  std::vector<int> col_used(static_cast<std::size_t>(de), 0);
  std::vector<std::int64_t> counts;
  for (int a = 0; a < ds; ++a) {
    int found = -1;
    for (int b = 0; b < de; ++b) {
      if (ex.num[static_cast<std::size_t>(a) * de + b] == 0) continue;
      if (found >= 0 || col_used[static_cast<std::size_t>(b)]) return std::nullopt;
      found = b;
    }
    if (found >= 0) {
      col_used[static_cast<std::size_t>(found)] = 1;
      counts.push_back(ex.num[static_cast<std::size_t>(a) * de + found]);
    }
  }
  return RationalSpec(counts, ex.den);
}

DerivationCertificate derive_general(const PureState& state, double epsilon, const DerivationOptions& options) {
  if (!state.is_bipartite()) throw ValidationError("derivation needs a bipartite state");
  const Tolerances& tol = options.config.tol;
  const SchmidtForm form = schmidt_decompose(state, tol);
  const SchmidtFrame frame = schmidt_frame(form);
  const int r = form.rank();

  // Schmidt order, phases already absorbed into the partners.
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
  bool exact = false;
  if (const auto given = rational_spec_from_exact(state)) {
    counts = given->counts;
    std::stable_sort(counts.begin(), counts.end(), std::greater<>());
    total = given->total;
    exact = true;
  } else {
    std::vector<double> w(static_cast<std::size_t>(r));
    for (int k = 0; k < r; ++k) w[static_cast<std::size_t>(k)] = form.coefficients[k] * form.coefficients[k];
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= sum;
    const RationalSpec approx = apportion(w, epsilon, options.config.max_denominator);
    counts = approx.counts;
    total = approx.total;
  }

  const RationalSpec spec(counts, total);
  // The phase-scrubbed Schmidt form of the approximant.
  DerivationCertificate cert =
      derive_rational(rational_diagonal_state(counts, "psi", options.config.max_total_dim), spec, options);
  cert.notes.push_back("derivation run on the phase-scrubbed Schmidt form of the state");
  if (!exact) {
    cert.exactness = Exactness{false, epsilon};
    cert.approximant = spec;
  }

  // Compare against the Born rule of the original state along its Schmidt
  // vectors (approximant outcome k corresponds to Schmidt vector k).
  attach_born_check(cert, "psi", [&](const ProbabilityLabel& l) {
    if (l.outcome >= r) return BornValue{0.0, Rational(0)};
    const CVector v = frame.basis(l.side).col(l.outcome);
    std::optional<Rational> ex = exact ? exact_born_probability(state, l.side, v, tol.ortho) : std::nullopt;
    return BornValue{born_probability(state, l.side, v), ex};
  });
  return cert;
}

}  // namespace envlab
