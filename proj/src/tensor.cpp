#include "envlab/tensor.hpp"

#include "envlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace envlab {

namespace {

// Strides for viewing the amplitude vector as (outer, d, inner) around one
// subsystem.
struct AxisView {
  std::size_t outer = 1;
  int dim = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const std::vector<int>& dims, int axis) {
  if (axis < 0 || axis >= static_cast<int>(dims.size())) {
    throw ValidationError("state has no subsystem with index " + std::to_string(axis));
  }
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= static_cast<std::size_t>(dims[i]);
  v.dim = dims[axis];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) v.inner *= static_cast<std::size_t>(dims[i]);
  return v;
}

// Matrix with the `axis` index as rows and all other indices (in order) as
// columns.
CMatrix unfold(const PureState& state, int axis) {
  const AxisView v = axis_view(state.dims(), axis);
  const auto& amps = state.amplitudes();
  CMatrix m(v.dim, static_cast<Eigen::Index>(v.outer * v.inner));
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (int a = 0; a < v.dim; ++a) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        m(a, static_cast<Eigen::Index>(o * v.inner + i)) =
            amps[static_cast<Eigen::Index>((o * v.dim + a) * v.inner + i)];
      }
    }
  }
  return m;
}

}  // namespace

PureState apply_local(const PureState& state, const LocalUnitary& u, const Tolerances& tol) {
  const int axis = side_index(u.side());
  const AxisView v = axis_view(state.dims(), axis);
  if (u.dim() != v.dim) {
    throw ValidationError("unitary of dimension " + std::to_string(u.dim()) +
                          " does not match subsystem " + std::string(side_name(u.side())) +
                          " of dimension " + std::to_string(v.dim));
  }
  const auto& in = state.amplitudes();
  const CMatrix& m = u.matrix();
  CVector out = CVector::Zero(in.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (int a = 0; a < v.dim; ++a) {
      for (int b = 0; b < v.dim; ++b) {
        const Complex w = m(a, b);
        if (w == Complex(0.0, 0.0)) continue;
        const std::size_t src = (o * v.dim + b) * v.inner;
        const std::size_t dst = (o * v.dim + a) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) {
          out[static_cast<Eigen::Index>(dst + i)] += w * in[static_cast<Eigen::Index>(src + i)];
        }
      }
    }
  }
  return PureState(state.dims(), std::move(out), state.label(), tol,
                   std::max(state.total_dim(), kDefaultMaxTotalDim));
}

DensityMatrix partial_trace(const PureState& state, Side keep, const Tolerances& tol) {
  const CMatrix m = unfold(state, side_index(keep));
  return DensityMatrix(m * m.adjoint(), tol);
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("trace distance needs equal dimensions, got " + std::to_string(a.dim()) +
                          " and " + std::to_string(b.dim()));
  }
  CMatrix diff = a.matrix() - b.matrix();
  diff = 0.5 * (diff + diff.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(diff, Eigen::EigenvaluesOnly);
  return 0.5 * eig.eigenvalues().cwiseAbs().sum();
}

PhaseMatch states_equal_up_to_phase(const PureState& a, const PureState& b, double tol) {
  if (a.dims() != b.dims()) throw ValidationError("cannot compare states with different dims");
  const Complex overlap = b.amplitudes().dot(a.amplitudes());  // <b|a>
  PhaseMatch match;
  match.phase = std::abs(overlap) > 0.0 ? std::arg(overlap) : 0.0;
  const Complex rot = std::polar(1.0, match.phase);
  match.distance = (a.amplitudes() - rot * b.amplitudes()).norm();
  match.equal = match.distance < tol;
  return match;
}

double born_probability(const PureState& state, Side side, int outcome) {
  const int d = state.dim(side);
  if (outcome < 0 || outcome >= d) {
    throw ValidationError("outcome " + std::to_string(outcome) + " out of range for subsystem " +
                          std::string(side_name(side)) + " of dimension " + std::to_string(d));
  }
  const CMatrix m = unfold(state, side_index(side));
  return m.row(outcome).squaredNorm();
}

double born_probability(const PureState& state, Side side, const CVector& outcome) {
  const CMatrix m = unfold(state, side_index(side));
  if (outcome.size() != m.rows()) throw ValidationError("outcome vector has the wrong dimension");
  const double n2 = outcome.squaredNorm();
  if (n2 <= 0.0) throw ValidationError("outcome vector is zero");
  // <k| rho |k> = || <k| M ||^2 with M rows indexed by the kept subsystem.
  return (outcome.adjoint() * m).squaredNorm() / n2;
}

std::vector<double> born_distribution(const PureState& state, Side side) {
  const CMatrix m = unfold(state, side_index(side));
  std::vector<double> p(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index a = 0; a < m.rows(); ++a) p[static_cast<std::size_t>(a)] = m.row(a).squaredNorm();
  return p;
}

std::optional<Rational> exact_born_probability(const PureState& state, Side side, int outcome) {
  if (!state.exact()) return std::nullopt;
  const AxisView v = axis_view(state.dims(), side_index(side));
  if (outcome < 0 || outcome >= v.dim) throw ValidationError("outcome out of range");
  const ExactAmplitudes& ex = *state.exact();
  BigInt sum = 0;
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      sum += ex.num[(o * v.dim + static_cast<std::size_t>(outcome)) * v.inner + i];
    }
  }
  return Rational(sum, BigInt(ex.den));
}

std::optional<Rational> exact_born_probability(const PureState& state, Side side,
                                               const CVector& outcome, double tol) {
  if (!state.exact()) return std::nullopt;
  Eigen::Index idx = 0;
  const double peak = outcome.cwiseAbs().maxCoeff(&idx);
  if (std::abs(peak - 1.0) > tol || std::abs(outcome.squaredNorm() - 1.0) > tol) return std::nullopt;
  return exact_born_probability(state, side, static_cast<int>(idx));
}

CMatrix swap_matrix(const CVector& a, const CVector& b) {
  const Eigen::Index d = a.size();
  // 1 - aa' - bb' + ab' + ba' = 1 - vv' with v = a - b.
  const CVector v = a - b;
  CMatrix u = CMatrix::Identity(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Complex cj = std::conj(v[j]);
    if (cj == Complex(0.0, 0.0)) continue;
    for (Eigen::Index i = 0; i < d; ++i) u(i, j) -= v[i] * cj;
  }
  return u;
}

CMatrix phase_matrix(const CMatrix& vectors, const std::vector<Complex>& phases) {
  const Eigen::Index d = vectors.rows();
  CMatrix u = CMatrix::Identity(d, d);
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    u += (phases[static_cast<std::size_t>(k)] - Complex(1.0, 0.0)) * vectors.col(k) * vectors.col(k).adjoint();
  }
  return u;
}

namespace {

// Orthogonalizes computational vectors against `chosen` after projecting with
// `projector`, picking the largest residual each round.
CMatrix pivoted_basis(const CMatrix& projector, int count, const CMatrix& prior) {
  const Eigen::Index d = projector.rows();
  CMatrix basis(d, count);
  // Column i holds the residual of computational vector i against prior and
  // everything picked so far; updated in place after each pick.
  CMatrix residual = projector;
  for (int pass = 0; pass < 2 && prior.cols() > 0; ++pass) {
    residual -= prior * (prior.adjoint() * residual);
  }
  int found = 0;
  std::vector<bool> used(static_cast<std::size_t>(d), false);
  while (found < count) {
    Eigen::Index best = -1;
    double best_norm = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double n = residual.col(i).norm();
      if (n > best_norm + 1e-12) {
        best = i;
        best_norm = n;
      }
    }
    if (best < 0 || best_norm < 1e-10) {
      throw Error("pivoted orthogonalization ran out of independent directions");
    }
    used[static_cast<std::size_t>(best)] = true;
    CVector q = residual.col(best) / best_norm;
    // One more pass keeps q orthogonal once many picks have accumulated.
    if (prior.cols() > 0) q -= prior * (prior.adjoint() * q);
    if (found > 0) q -= basis.leftCols(found) * (basis.leftCols(found).adjoint() * q);
    q.normalize();
    basis.col(found++) = q;
    residual -= q * (q.adjoint() * residual);
  }
  return basis;
}

}  // namespace

CMatrix canonical_span_basis(const CMatrix& vectors) {
  if (vectors.cols() == 0) return vectors;
  const CMatrix projector = vectors * vectors.adjoint();
  return pivoted_basis(projector, static_cast<int>(vectors.cols()), CMatrix(vectors.rows(), 0));
}

CMatrix complete_basis(const CMatrix& vectors) {
  const Eigen::Index d = vectors.rows();
  const int missing = static_cast<int>(d - vectors.cols());
  CMatrix full(d, d);
  full.leftCols(vectors.cols()) = vectors;
  if (missing <= 0) return full;
  // Computational vectors (up to phase) complete with the unused ones in
  // ascending order, which is what the pivoted search would pick.
  std::vector<bool> hit(static_cast<std::size_t>(d), false);
  bool computational = true;
  for (Eigen::Index k = 0; k < vectors.cols() && computational; ++k) {
    Eigen::Index idx = 0;
    const double peak = vectors.col(k).cwiseAbs().maxCoeff(&idx);
    computational = std::abs(peak - 1.0) < 1e-14 && !hit[static_cast<std::size_t>(idx)];
    hit[static_cast<std::size_t>(idx)] = true;
  }
  if (computational) {
    Eigen::Index col = vectors.cols();
    for (Eigen::Index i = 0; i < d; ++i) {
      if (hit[static_cast<std::size_t>(i)]) continue;
      full.col(col) = CVector::Unit(d, i);
      ++col;
    }
    return full;
  }
  const CMatrix complement = CMatrix::Identity(d, d) - vectors * vectors.adjoint();
  full.rightCols(missing) = pivoted_basis(complement, missing, vectors);
  return full;
}

PureState regroup(const PureState& state, const std::vector<Side>& first, std::size_t max_total_dim) {
  const auto& dims = state.dims();
  const int n = state.subsystem_count();
  std::vector<int> order;
  for (Side s : first) {
    const int idx = side_index(s);
    if (idx >= n) throw ValidationError("regroup names a missing subsystem");
    order.push_back(idx);
  }
  for (int i = 0; i < n; ++i) {
    if (std::find(order.begin(), order.end(), i) == order.end()) order.push_back(i);
  }
  if (first.empty() || first.size() >= static_cast<std::size_t>(n)) {
    throw ValidationError("regroup needs a proper nonempty subset");
  }
  // Strides of the original layout.
  std::vector<std::size_t> stride(static_cast<std::size_t>(n), 1);
  for (int i = n - 2; i >= 0; --i) stride[i] = stride[i + 1] * static_cast<std::size_t>(dims[i + 1]);
  int da = 1;
  for (std::size_t i = 0; i < first.size(); ++i) da *= dims[order[i]];
  const int db = static_cast<int>(state.total_dim()) / da;

  CVector out(static_cast<Eigen::Index>(state.total_dim()));
  std::vector<int> digit(static_cast<std::size_t>(n), 0);
  std::vector<std::size_t> source(state.total_dim());
  for (std::size_t lin = 0; lin < state.total_dim(); ++lin) {
    std::size_t src = 0;
    for (int i = 0; i < n; ++i) src += static_cast<std::size_t>(digit[i]) * stride[order[i]];
    source[lin] = src;
    out[static_cast<Eigen::Index>(lin)] = state.amplitudes()[static_cast<Eigen::Index>(src)];
    for (int i = n - 1; i >= 0; --i) {
      if (++digit[i] < dims[order[i]]) break;
      digit[i] = 0;
    }
  }
  PureState result({da, db}, std::move(out), state.label(), Tolerances{}, max_total_dim);
  if (!state.exact()) return result;
  const ExactAmplitudes& ex = *state.exact();
  ExactAmplitudes moved;
  moved.den = ex.den;
  moved.num.resize(source.size());
  moved.signs.resize(source.size());
  for (std::size_t lin = 0; lin < source.size(); ++lin) {
    moved.num[lin] = ex.num[source[lin]];
    moved.signs[lin] = ex.signs[source[lin]];
  }
  return result.with_exact(std::move(moved));
}

PureState swap_factors(const PureState& state) {
  if (!state.is_bipartite()) throw ValidationError("swap_factors needs a bipartite state");
  const CMatrix m = state.as_matrix();
  PureState result = state_from_matrix(m.transpose(), state.label(), Tolerances{},
                                       std::max(state.total_dim(), kDefaultMaxTotalDim));
  if (!state.exact()) return result;
  const ExactAmplitudes& ex = *state.exact();
  const auto ds = static_cast<std::size_t>(state.dim(Side::S));
  const auto de = static_cast<std::size_t>(state.dim(Side::E));
  ExactAmplitudes moved;
  moved.den = ex.den;
  moved.num.resize(ex.num.size());
  moved.signs.resize(ex.signs.size());
  for (std::size_t a = 0; a < ds; ++a) {
    for (std::size_t b = 0; b < de; ++b) {
      moved.num[b * ds + a] = ex.num[a * de + b];
      moved.signs[b * ds + a] = ex.signs[a * de + b];
    }
  }
  return result.with_exact(std::move(moved));
}

PureState rational_diagonal_state(const std::vector<std::int64_t>& counts, std::string label,
                                  std::size_t max_total_dim) {
  if (counts.empty()) throw ValidationError("need at least one branch");
  const int r = static_cast<int>(counts.size());
  const int d = std::max(r, 2);
  if (static_cast<std::size_t>(d) * d > max_total_dim) {
    throw ValidationError("diagonal state exceeds the dimension cap");
  }
  ExactAmplitudes ex;
  ex.num.assign(static_cast<std::size_t>(d) * d, 0);
  ex.signs.assign(static_cast<std::size_t>(d) * d, 1);
  ex.den = 0;
  for (int k = 0; k < r; ++k) {
    if (counts[k] <= 0) throw ValidationError("branch counts must be positive");
    ex.num[static_cast<std::size_t>(k) * d + k] = counts[k];
    ex.den += counts[k];
  }
  return PureState::from_exact({d, d}, std::move(ex), std::move(label));
}

PureState equal_amplitude_state(int n, std::string label, std::size_t max_total_dim) {
  if (n < 1) throw ValidationError("equal-amplitude state needs n >= 1");
  return rational_diagonal_state(std::vector<std::int64_t>(static_cast<std::size_t>(n), 1),
                                 std::move(label), max_total_dim);
}

CMatrix frame_coefficients(const PureState& state, const SchmidtFrame& frame) {
  const CMatrix a = state.as_matrix();
  if (a.rows() != frame.basis_S.rows() || a.cols() != frame.basis_E.rows()) {
    throw ValidationError("frame dimensions do not match the state");
  }
  // psi = sum_ij B_ij s_i (x) e_j  =>  A = U_S B U_E^T.
  return frame.basis_S.adjoint() * a * frame.basis_E.conjugate();
}

}  // namespace envlab
