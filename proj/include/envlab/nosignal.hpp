#pragma once

#include "envlab/random.hpp"
#include "envlab/tensor.hpp"

#include <cstdint>
#include <vector>

namespace envlab {

// Trace distance between the reduced states on `local_side` before and after
// `remote` acts on the other side.
double check_no_signalling(const PureState& state, const LocalUnitary& remote, Side local_side,
                           const Tolerances& tol = {});

struct SearchOptions {
  int restarts = 50;
  int iterations = 200;
  std::uint64_t seed = 0;
  double step = 1e-5;          // forward-difference step
  double initial_rate = 0.5;   // ascent step length in parameter space
};

struct SignallingReport {
  double best_distance = 0.0;
  LocalUnitary best_unitary;
  Side remote_side = Side::E;
  int restarts = 0;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> restart_best;
  std::uint64_t evaluations = 0;
};

// Hermitian d x d matrix from d^2 reals: d diagonal entries, then (re, im)
// for each i < j in row-major order.
CMatrix hermitian_from_params(const std::vector<double>& params, int d);

// exp(iH) through the eigendecomposition of H.
CMatrix unitary_from_generator(const CMatrix& h);

// Multi-start finite-difference ascent of check_no_signalling over remote
// unitaries exp(iH). Restart i is seeded with seed + i.
SignallingReport adversarial_search(const PureState& state, Side remote_side,
                                    const SearchOptions& options = {}, const Tolerances& tol = {});

// Spread (max - min) of the E-side probability of the Schmidt vector eps_k
// across measurement contexts, each an orthonormal basis of E (as columns)
// containing eps_k up to phase.
double contextuality_check(const PureState& state, int k, const std::vector<CMatrix>& contexts,
                           const Tolerances& tol = {});

// Random orthonormal basis whose first column is `v`.
CMatrix random_context(const CVector& v, Rng& rng);

}  // namespace envlab
