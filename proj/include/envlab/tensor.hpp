#pragma once

#include "envlab/config.hpp"
#include "envlab/state.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace envlab {

// A maximal run of Schmidt coefficients that are equal within tol.spec;
// `spread` is the largest minus the smallest coefficient merged into it.
struct DegenerateBlock {
  int begin = 0;
  int end = 0;
  double spread = 0.0;

  int size() const { return end - begin; }
};

struct SchmidtForm {
  RVector coefficients;  // descending, nonnegative
  CMatrix basis_S;       // d_S x r
  CMatrix basis_E;       // d_E x r
  std::vector<DegenerateBlock> blocks;

  int rank() const { return static_cast<int>(coefficients.size()); }
};

// Schmidt vectors completed to full orthonormal bases of each side. Columns
// [0, rank) are the Schmidt vectors in Schmidt order.
struct SchmidtFrame {
  RVector coefficients;
  CMatrix basis_S;  // d_S x d_S
  CMatrix basis_E;  // d_E x d_E

  int rank() const { return static_cast<int>(coefficients.size()); }
  const CMatrix& basis(Side side) const { return side == Side::S ? basis_S : basis_E; }
};

SchmidtForm schmidt_decompose(const PureState& state, const Tolerances& tol = {});
SchmidtFrame schmidt_frame(const SchmidtForm& form);

// Coefficient matrix of a bipartite state in the given frame:
// result(i, j) = <frame_S_i, frame_E_j | state>.
CMatrix frame_coefficients(const PureState& state, const SchmidtFrame& frame);

// Residual of reconstructing `state` from `form` (minimized over global phase).
double reconstruction_error(const PureState& state, const SchmidtForm& form);

PureState apply_local(const PureState& state, const LocalUnitary& u,
                      const Tolerances& tol = {});

DensityMatrix partial_trace(const PureState& state, Side keep, const Tolerances& tol = {});

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

struct PhaseMatch {
  bool equal = false;
  double phase = 0.0;     // arg <b|a>
  double distance = 0.0;  // || a - e^{i phase} b ||
};

PhaseMatch states_equal_up_to_phase(const PureState& a, const PureState& b, double tol);

double born_probability(const PureState& state, Side side, int outcome);
double born_probability(const PureState& state, Side side, const CVector& outcome);
std::vector<double> born_distribution(const PureState& state, Side side);

// Exact probability of the computational outcome on `side`, from the exact
// annotation (diagonal of the reduced state in rational arithmetic).
std::optional<Rational> exact_born_probability(const PureState& state, Side side, int outcome);

// Exact Born value for a frame vector that coincides (up to phase) with a
// computational basis vector; empty when there is no exact annotation or the
// vector is not computational.
std::optional<Rational> exact_born_probability(const PureState& state, Side side,
                                               const CVector& outcome, double tol);

// Unitary exchanging orthonormal vectors a and b, identity on their complement.
CMatrix swap_matrix(const CVector& a, const CVector& b);

// Diagonal matrix sum_j phase_j |v_j><v_j| + (1 - sum_j |v_j><v_j|).
CMatrix phase_matrix(const CMatrix& vectors, const std::vector<Complex>& phases);

// Orthonormal basis of span(vectors) chosen by pivoted orthogonalization of
// computational vectors (largest residual first, lowest index on ties).
CMatrix canonical_span_basis(const CMatrix& vectors);

// Completes orthonormal columns to a full basis using canonical_span_basis on
// the orthogonal complement.
CMatrix complete_basis(const CMatrix& vectors);

// Regroups a tripartite state into a bipartite one whose first factor is the
// product of `first` (in the order given) and second factor the rest in
// ascending order.
PureState regroup(const PureState& state, const std::vector<Side>& first,
                  std::size_t max_total_dim = kDefaultMaxTotalDim);

// Exchanges the two factors of a bipartite state.
PureState swap_factors(const PureState& state);

// Equal-amplitude rank-n state sum_k |k>|k> / sqrt(n) on (max(n,2), max(n,2))
// with exact annotation.
PureState equal_amplitude_state(int n, std::string label = "psi1",
                                std::size_t max_total_dim = kDefaultMaxTotalDim);

// sum_k sqrt(counts_k / total) |k>|k> with exact annotation.
PureState rational_diagonal_state(const std::vector<std::int64_t>& counts, std::string label = "psi",
                                  std::size_t max_total_dim = kDefaultMaxTotalDim);

}  // namespace envlab
