#pragma once

#include "envlab/tensor.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace envlab {

struct EnvarianceVerdict {
  bool envariant = false;
  // Unitary on the opposite side undoing the tested one; set iff envariant.
  std::optional<LocalUnitary> witness;
  // Distance between the state and (witness . tested) state, minimized over
  // global phase (or exact when strict). Computed for the best candidate
  // witness even when the verdict is negative.
  double residual = 0.0;
  // max |rho(before) - rho(after)| on the acted-on side.
  double reduced_state_deviation = 0.0;
  bool witness_verified = false;
  // Degenerate Schmidt blocks of the state whose coefficients were not
  // exactly equal but were merged under tol.spec.
  std::vector<DegenerateBlock> merged_blocks;
};

struct EnvarianceOptions {
  // Require (1 x w)(u x 1)|psi> == |psi> with no global phase; the phase is
  // absorbed into the witness.
  bool strict = false;
  // Return the witness matrix. When false the verdict and residual are still
  // computed, and `witness` stays empty.
  bool build_witness = true;
};

EnvarianceVerdict is_envariant(const PureState& state, const LocalUnitary& u,
                               const Tolerances& tol = {}, EnvarianceOptions options = {});

LocalUnitary counter_unitary(const PureState& state, const LocalUnitary& u,
                             const Tolerances& tol = {});

struct PhaseScrub {
  LocalUnitary u_S;
  LocalUnitary u_E;
  PureState imprinted;  // (u_S x 1)|psi>
  PureState restored;   // (1 x u_E)(u_S x 1)|psi>
  PhaseMatch match;     // restored vs original
};

// Local pair that writes `phases` onto the Schmidt branches from S and
// removes them from E.
PhaseScrub phase_scrub_witness(const PureState& state, const std::vector<double>& phases,
                               const Tolerances& tol = {});

// Schmidt-index pairs (k < l) with |alpha_k - alpha_l| < tol.spec.
std::vector<std::pair<int, int>> envariant_swaps(const PureState& state, const Tolerances& tol = {});
std::vector<std::pair<int, int>> envariant_swaps(const SchmidtForm& form, const Tolerances& tol = {});

// Swap of frame vectors k and l on one side, identity elsewhere.
LocalUnitary branch_swap(const SchmidtFrame& frame, Side side, int k, int l);

}  // namespace envlab
