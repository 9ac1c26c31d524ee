#include "envlab/envariance.hpp"

#include "envlab/errors.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace envlab {

namespace {

// Closest matrix with orthonormal columns (polar factor).
CMatrix orthonormalize(const CMatrix& m) {
  const CMatrix gram = m.adjoint() * m;
  if ((gram - CMatrix::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff() < 1e-13) return m;
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

// p q^dagger, accumulated over nonzero entries when the factors are sparse
// (branch vectors of fine-grained states usually are).
CMatrix outer_sum(const CMatrix& p, const CMatrix& q) {
  const Eigen::Index d = p.rows();
  std::size_t work = 0;
  std::vector<std::vector<Eigen::Index>> np(static_cast<std::size_t>(p.cols()));
  std::vector<std::vector<Eigen::Index>> nq(static_cast<std::size_t>(p.cols()));
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (p(i, k) != Complex(0.0, 0.0)) np[k].push_back(i);
      if (q(i, k) != Complex(0.0, 0.0)) nq[k].push_back(i);
    }
    work += np[k].size() * nq[k].size();
  }
  if (work * 4 > static_cast<std::size_t>(d * d * p.cols())) return p * q.adjoint();
  CMatrix out = CMatrix::Zero(d, q.rows());
  for (Eigen::Index k = 0; k < p.cols(); ++k) {
    for (Eigen::Index j : nq[k]) {
      const Complex c = std::conj(q(j, k));
      for (Eigen::Index i : np[k]) out(i, j) += p(i, k) * c;
    }
  }
  return out;
}

struct Candidate {
  CMatrix witness;  // acts on the second factor
  // When set, witness = 1 + p q^dagger, which makes applying it cheap.
  std::optional<std::pair<CMatrix, CMatrix>> low_rank;
  double deviation = 0.0;
};

// Builds the second-factor unitary mapping (u x 1)|psi> back to |psi>, for u
// acting on the first factor. With psi = sum_k a_k s_k e_k and
// f_k = A_phi^T conj(s_k), the witness sends f_k / |f_k| to e_k; when the
// reduced states agree the f_k are orthogonal with norms a_k.
Candidate build_candidate(const PureState& state, const SchmidtForm& form, const CMatrix& u, bool dense) {
  const CMatrix a = state.as_matrix();
  const CMatrix a_phi = u * a;

  const CMatrix rho = a * a.adjoint();
  const CMatrix rho_phi = a_phi * a_phi.adjoint();
  Candidate c;
  c.deviation = (rho - rho_phi).cwiseAbs().maxCoeff();

  const int r = form.rank();
  CMatrix f = a_phi.transpose() * form.basis_S.conjugate();
  for (int k = 0; k < r; ++k) {
    const double n = f.col(k).norm();
    if (n > 0.0) f.col(k) /= n;
  }
  f = orthonormalize(f);
  const CMatrix& e = form.basis_E;
  const Eigen::Index d = e.rows();
  // span(f) == span(e) iff f has no component outside span(e); then the
  // witness is e f^dagger on the span and identity elsewhere.
  const bool same_span = r == 0 || (f - e * (e.adjoint() * f)).cwiseAbs().maxCoeff() < 1e-12;
  if (same_span) {
    CMatrix q = f - e;
    if (dense) {
      c.witness = outer_sum(e, q);
      c.witness.diagonal().array() += Complex(1.0, 0.0);
    }
    c.low_rank.emplace(e, std::move(q));
  } else {
    c.witness = e * f.adjoint();
    if (r < d) {
      const CMatrix xe = complete_basis(e).rightCols(d - r);
      const CMatrix xf = complete_basis(f).rightCols(d - r);
      c.witness += xe * xf.adjoint();
    }
  }
  return c;
}

EnvarianceVerdict verdict_on_first(const PureState& state, const CMatrix& u, Side witness_side,
                                   const Tolerances& tol, EnvarianceOptions options) {
  const SchmidtForm form = schmidt_decompose(state, tol);
  Candidate c = build_candidate(state, form, u, options.build_witness);

  EnvarianceVerdict v;
  v.reduced_state_deviation = c.deviation;
  v.envariant = c.deviation <= tol.state;
  for (const auto& b : form.blocks) {
    if (b.size() > 1 && b.spread > 0.0) v.merged_blocks.push_back(b);
  }

  const CMatrix a = state.as_matrix();
  const CMatrix ua = u * a;
  CMatrix back;
  if (c.low_rank) {
    // (ua) w^T = ua + (ua conj(q)) p^T
    const auto& [p, q] = *c.low_rank;
    back = ua + (ua * q.conjugate()) * p.transpose();
  } else {
    back = ua * c.witness.transpose();
  }
  const Complex overlap = (a.conjugate().cwiseProduct(back)).sum();
  if (options.strict && std::abs(overlap) > 0.0) {
    const Complex undo = std::conj(overlap) / std::abs(overlap);
    c.witness *= undo;
    back *= undo;
  }
  if (options.strict) {
    v.residual = (back - a).norm();
  } else {
    const Complex rot = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex(1.0, 0.0);
    v.residual = (back - rot * a).norm();
  }
  if (v.envariant) {
    // Unitary by construction; the residual below is the real test.
    if (options.build_witness) v.witness = LocalUnitary::unchecked(witness_side, std::move(c.witness));
    v.witness_verified = v.residual < tol.state;
  }
  return v;
}

}  // namespace

EnvarianceVerdict is_envariant(const PureState& state, const LocalUnitary& u, const Tolerances& tol,
                               EnvarianceOptions options) {
  if (!state.is_bipartite()) throw ValidationError("envariance needs a bipartite state");
  if (u.side() == Side::C) throw ValidationError("envariance is defined for S or E actions");
  if (u.dim() != state.dim(u.side())) {
    throw ValidationError("unitary dimension does not match subsystem " +
                          std::string(side_name(u.side())));
  }
  if (u.side() == Side::S) return verdict_on_first(state, u.matrix(), Side::E, tol, options);
  return verdict_on_first(swap_factors(state), u.matrix(), Side::S, tol, options);
}

LocalUnitary counter_unitary(const PureState& state, const LocalUnitary& u, const Tolerances& tol) {
  EnvarianceVerdict v = is_envariant(state, u, tol);
  if (!v.envariant) {
    std::ostringstream os;
    os << "state is not envariant under the given unitary (reduced-state deviation "
       << v.reduced_state_deviation << ", residual " << v.residual << ")";
    throw PreconditionError(os.str());
  }
  return *v.witness;
}

PhaseScrub phase_scrub_witness(const PureState& state, const std::vector<double>& phases,
                               const Tolerances& tol) {
  const SchmidtForm form = schmidt_decompose(state, tol);
  if (static_cast<int>(phases.size()) != form.rank()) {
    throw ValidationError("expected " + std::to_string(form.rank()) + " phases (Schmidt rank), got " +
                          std::to_string(phases.size()));
  }
  std::vector<Complex> on_s;
  std::vector<Complex> on_e;
  for (double p : phases) {
    on_s.push_back(std::polar(1.0, p));
    on_e.push_back(std::polar(1.0, -p));
  }
  LocalUnitary u_s(Side::S, phase_matrix(form.basis_S, on_s), tol);
  LocalUnitary u_e(Side::E, phase_matrix(form.basis_E, on_e), tol);
  PureState imprinted = apply_local(state, u_s, tol);
  PureState restored = apply_local(imprinted, u_e, tol);
  PhaseMatch match = states_equal_up_to_phase(restored, state, tol.state);
  return PhaseScrub{std::move(u_s), std::move(u_e), std::move(imprinted), std::move(restored), match};
}

std::vector<std::pair<int, int>> envariant_swaps(const SchmidtForm& form, const Tolerances& tol) {
  std::vector<std::pair<int, int>> pairs;
  for (int k = 0; k < form.rank(); ++k) {
    for (int l = k + 1; l < form.rank(); ++l) {
      if (std::abs(form.coefficients[k] - form.coefficients[l]) < tol.spec) pairs.emplace_back(k, l);
    }
  }
  return pairs;
}

std::vector<std::pair<int, int>> envariant_swaps(const PureState& state, const Tolerances& tol) {
  return envariant_swaps(schmidt_decompose(state, tol), tol);
}

LocalUnitary branch_swap(const SchmidtFrame& frame, Side side, int k, int l) {
  const CMatrix& basis = frame.basis(side);
  if (k < 0 || l < 0 || k >= basis.cols() || l >= basis.cols() || k == l) {
    throw ValidationError("branch swap indices out of range");
  }
  return LocalUnitary::unchecked(side, swap_matrix(basis.col(k), basis.col(l)));
}

}  // namespace envlab
