#include "envlab/errors.hpp"
#include "envlab/random.hpp"
#include "envlab/tensor.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace envlab;

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

PureState bell() { return equal_amplitude_state(2, "psi1"); }

PureState product00() {
  CVector a = CVector::Zero(4);
  a[0] = 1.0;
  return PureState({2, 2}, a, "prod");
}

PureState third_two_thirds() {
  CVector a = CVector::Zero(4);
  a[0] = std::sqrt(1.0 / 3.0);
  a[3] = std::sqrt(2.0 / 3.0);
  return PureState({2, 2}, a);
}

LocalUnitary swap_on(Side side) { return LocalUnitary(side, oracle::swap01(2)); }

}  // namespace

TEST(PureState, RejectsBadInput) {
  EXPECT_THROW(PureState({2}, CVector::Ones(2) / std::sqrt(2.0)), ValidationError);
  EXPECT_THROW(PureState({2, 2}, CVector::Ones(3) / std::sqrt(3.0)), ValidationError);
  EXPECT_THROW(PureState({2, 0}, CVector::Zero(0)), ValidationError);
  try {
    PureState({2, 2}, CVector::Constant(4, 0.25));
    FAIL() << "unnormalized state accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("norm deficit 0.75"), std::string::npos) << e.what();
  }
  EXPECT_THROW(PureState({64, 65}, CVector::Zero(64 * 65)), ValidationError);
}

TEST(PureState, ExactAnnotationMustAgree) {
  ExactAmplitudes ex{{1, 0, 0, 2}, 3, {1, 1, 1, 1}};
  const PureState s = PureState::from_exact({2, 2}, ex);
  EXPECT_NEAR(std::abs(s.amplitudes()[3]), std::sqrt(2.0 / 3.0), 1e-15);
  ExactAmplitudes wrong{{2, 0, 0, 1}, 3, {1, 1, 1, 1}};
  EXPECT_THROW(third_two_thirds().with_exact(wrong), ValidationError);
  ExactAmplitudes unnormalized{{1, 0, 0, 1}, 3, {1, 1, 1, 1}};
  EXPECT_THROW(PureState::from_exact({2, 2}, unnormalized), ValidationError);
}

TEST(LocalUnitaryTest, RejectsNonUnitary) {
  CMatrix m = CMatrix::Identity(2, 2);
  m(0, 1) = 0.1;
  EXPECT_THROW(LocalUnitary(Side::S, m), ValidationError);
  EXPECT_THROW(LocalUnitary(Side::S, CMatrix::Identity(2, 3)), ValidationError);
}

TEST(Schmidt, BellState) {
  const SchmidtForm f = schmidt_decompose(bell());
  ASSERT_EQ(f.rank(), 2);
  EXPECT_NEAR(f.coefficients[0], kInvSqrt2, 1e-15);
  EXPECT_NEAR(f.coefficients[1], kInvSqrt2, 1e-15);
  EXPECT_LT(oracle::max_abs(f.basis_S - CMatrix::Identity(2, 2)), 1e-15);
  EXPECT_LT(oracle::max_abs(f.basis_E - CMatrix::Identity(2, 2)), 1e-15);
  ASSERT_EQ(f.blocks.size(), 1u);
  EXPECT_EQ(f.blocks[0].size(), 2);
}

TEST(Schmidt, ProductStateHasRankOne) {
  const SchmidtForm f = schmidt_decompose(product00());
  ASSERT_EQ(f.rank(), 1);
  EXPECT_NEAR(f.coefficients[0], 1.0, 1e-15);
}

TEST(Schmidt, Random3x3MatchesSingularValues) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const PureState s = random_state({3, 3}, rng);
    const SchmidtForm f = schmidt_decompose(s);
    const RVector sv = oracle::singular_values(oracle::reshape(s));
    ASSERT_EQ(f.rank(), sv.size());
    EXPECT_LT((f.coefficients - sv).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(reconstruction_error(s, f), 1e-9);
  }
}

TEST(Schmidt, RejectsTripartite) {
  Rng rng(1);
  EXPECT_THROW(schmidt_decompose(random_state({2, 2, 2}, rng)), ValidationError);
}

TEST(Schmidt, DegenerateBlocksAreCanonical) {
  // The same state written in two different local bases yields the same
  // decomposition.
  Rng rng(5);
  const PureState s = equal_amplitude_state(4, "psi");
  const CMatrix u = haar_unitary(4, rng);
  const PureState t = apply_local(apply_local(s, LocalUnitary(Side::S, u)), LocalUnitary(Side::E, u.conjugate()));
  // (u x conj u) leaves the maximally entangled state invariant.
  EXPECT_LT(oracle::phase_distance(s.amplitudes(), t.amplitudes()), 1e-12);
  const SchmidtForm a = schmidt_decompose(s);
  const SchmidtForm b = schmidt_decompose(t);
  EXPECT_LT(oracle::max_abs(a.basis_S - CMatrix::Identity(4, 4)), 1e-12);
  EXPECT_LT(oracle::max_abs(a.basis_S - b.basis_S), 1e-9);
  EXPECT_LT(oracle::max_abs(a.basis_E - b.basis_E), 1e-9);
}

TEST(Schmidt, FrameCompletesBases) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const PureState s = random_state({2, 5}, rng);
    const SchmidtFrame fr = schmidt_frame(schmidt_decompose(s));
    EXPECT_EQ(fr.basis_E.cols(), 5);
    EXPECT_LT(oracle::max_abs(fr.basis_E.adjoint() * fr.basis_E - CMatrix::Identity(5, 5)), 1e-12);
    const CMatrix c = frame_coefficients(s, fr);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 5; ++j) {
        EXPECT_NEAR(std::abs(c(i, j)), i == j ? fr.coefficients[i] : 0.0, 1e-12);
      }
    }
  }
}

TEST(ApplyLocal, BellSwaps) {
  const PureState psi1 = bell();
  const PureState psi2 = apply_local(psi1, swap_on(Side::E));
  CVector expect = CVector::Zero(4);
  expect[1] = expect[2] = kInvSqrt2;
  EXPECT_LT((psi2.amplitudes() - expect).cwiseAbs().maxCoeff(), 1e-15);
  const PureState psi3 = apply_local(psi2, swap_on(Side::S));
  EXPECT_EQ(psi3.amplitudes(), psi1.amplitudes());
  EXPECT_EQ(apply_local(psi1, LocalUnitary::identity(Side::E, 2)).amplitudes(), psi1.amplitudes());
}

TEST(ApplyLocal, MatchesKroneckerOracle) {
  Rng rng(7);
  for (Side side : {Side::S, Side::E, Side::C}) {
    const PureState s = random_state({2, 3, 4}, rng);
    const CMatrix u = haar_unitary(s.dim(side), rng);
    const PureState t = apply_local(s, LocalUnitary(side, u));
    EXPECT_LT((t.amplitudes() - oracle::apply(s, u, side)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(ApplyLocal, DimensionMismatch) {
  EXPECT_THROW(apply_local(bell(), LocalUnitary::identity(Side::E, 3)), ValidationError);
  EXPECT_THROW(apply_local(bell(), LocalUnitary::identity(Side::C, 2)), ValidationError);
}

TEST(PartialTrace, Examples) {
  EXPECT_LT(oracle::max_abs(partial_trace(bell(), Side::S).matrix() - 0.5 * CMatrix::Identity(2, 2)), 1e-15);
  CMatrix p0 = CMatrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  EXPECT_LT(oracle::max_abs(partial_trace(product00(), Side::S).matrix() - p0), 1e-15);
}

TEST(PartialTrace, MatchesContractionOracle) {
  Rng rng(13);
  for (auto dims : std::vector<std::vector<int>>{{3, 4}, {5, 2}, {2, 3, 2}}) {
    const PureState s = random_state(dims, rng);
    for (int keep = 0; keep < s.subsystem_count(); ++keep) {
      const CMatrix rho = partial_trace(s, static_cast<Side>(keep)).matrix();
      EXPECT_LT(oracle::max_abs(rho - oracle::reduced(s, static_cast<Side>(keep))), 1e-14);
      EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
      EXPECT_LT(oracle::max_abs(rho - rho.adjoint()), 1e-15);
    }
  }
}

TEST(PartialTrace, UnknownSubsystem) {
  EXPECT_THROW(partial_trace(bell(), Side::C), ValidationError);
  EXPECT_THROW(parse_side("X"), ValidationError);
}

TEST(TraceDistance, Examples) {
  const DensityMatrix half(0.5 * CMatrix::Identity(2, 2));
  EXPECT_EQ(trace_distance(half, half), 0.0);
  CMatrix p0 = CMatrix::Zero(2, 2);
  CMatrix p1 = CMatrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;
  EXPECT_NEAR(trace_distance(DensityMatrix(p0), DensityMatrix(p1)), 1.0, 1e-15);
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 0.75;
  d(1, 1) = 0.25;
  EXPECT_NEAR(trace_distance(half, DensityMatrix(d)), 0.25, 1e-15);
  EXPECT_THROW(trace_distance(half, DensityMatrix(CMatrix::Identity(3, 3) / 3.0)), ValidationError);
}

TEST(TraceDistance, RejectsInvalidDensityMatrices) {
  EXPECT_THROW(DensityMatrix(CMatrix::Identity(2, 2)), ValidationError);
  CMatrix neg = CMatrix::Zero(2, 2);
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  EXPECT_THROW(DensityMatrix{neg}, ValidationError);
}

TEST(PhaseMatch, Examples) {
  const PureState psi1 = bell();
  const PhaseMatch same = states_equal_up_to_phase(psi1, psi1, 1e-9);
  EXPECT_TRUE(same.equal);
  EXPECT_EQ(same.phase, 0.0);
  const PureState neg({2, 2}, -psi1.amplitudes());
  const PhaseMatch flipped = states_equal_up_to_phase(psi1, neg, 1e-9);
  EXPECT_TRUE(flipped.equal);
  EXPECT_NEAR(std::abs(flipped.phase), std::numbers::pi, 1e-15);
  const PureState psi2 = apply_local(psi1, swap_on(Side::E));
  EXPECT_FALSE(states_equal_up_to_phase(psi1, psi2, 1e-9).equal);
  Rng rng(2);
  EXPECT_THROW(states_equal_up_to_phase(psi1, random_state({4, 1}, rng), 1e-9), ValidationError);
}

TEST(Born, Examples) {
  EXPECT_NEAR(born_probability(bell(), Side::S, 0), 0.5, 1e-15);
  EXPECT_NEAR(born_probability(third_two_thirds(), Side::S, 1), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(born_probability(bell(), Side::S, 2), ValidationError);
}

TEST(Born, MatchesReducedDiagonal) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const PureState s = random_state({3, 4}, rng);
    const CMatrix rho = oracle::reduced(s, Side::E);
    const auto dist = born_distribution(s, Side::E);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(born_probability(s, Side::E, k), rho(k, k).real(), 1e-14);
      sum += dist[static_cast<std::size_t>(k)];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const CVector v = random_unit_vector(4, rng);
    EXPECT_NEAR(born_probability(s, Side::E, v), oracle::born(s, Side::E, v), 1e-14);
  }
}

TEST(Born, ExactValues) {
  const PureState s = rational_diagonal_state({1, 2}, "psi");
  EXPECT_EQ(exact_born_probability(s, Side::S, 1), make_rational(2, 3));
  EXPECT_EQ(exact_born_probability(s, Side::E, 0), make_rational(1, 3));
  CVector v = CVector::Zero(2);
  v[1] = Complex(0.0, 1.0);
  EXPECT_EQ(exact_born_probability(s, Side::S, v, 1e-12), make_rational(2, 3));
  v[0] = v[1] = kInvSqrt2;
  EXPECT_FALSE(exact_born_probability(s, Side::S, v, 1e-12).has_value());
  EXPECT_FALSE(exact_born_probability(third_two_thirds(), Side::S, 0).has_value());
}

TEST(Regroup, MovesFactorsAndKeepsExactness) {
  Rng rng(19);
  const PureState s = random_state({2, 3, 2}, rng);
  const PureState r = regroup(s, {Side::S, Side::C});
  ASSERT_EQ(r.dims(), (std::vector<int>{4, 3}));
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int c = 0; c < 2; ++c) {
        EXPECT_EQ(r.amplitudes()[(a * 2 + c) * 3 + b], s.amplitudes()[(a * 3 + b) * 2 + c]);
      }
    }
  }
  const PureState q = rational_diagonal_state({1, 3}, "q");
  const PureState w = swap_factors(q);
  ASSERT_TRUE(w.exact().has_value());
  EXPECT_EQ(exact_born_probability(w, Side::E, 1), make_rational(3, 4));
}

TEST(Helpers, SwapAndPhaseMatrices) {
  Rng rng(23);
  const CMatrix u = haar_unitary(4, rng);
  const CMatrix sw = swap_matrix(u.col(1), u.col(3));
  EXPECT_LT(oracle::max_abs(sw * u.col(1) - u.col(3)), 1e-14);
  EXPECT_LT(oracle::max_abs(sw * u.col(3) - u.col(1)), 1e-14);
  EXPECT_LT(oracle::max_abs(sw * u.col(0) - u.col(0)), 1e-14);
  EXPECT_LT(oracle::max_abs(sw.adjoint() * sw - CMatrix::Identity(4, 4)), 1e-14);
  const CMatrix ph = phase_matrix(u.leftCols(2), {Complex(0, 1), Complex(-1, 0)});
  EXPECT_LT(oracle::max_abs(ph * u.col(0) - Complex(0, 1) * u.col(0)), 1e-14);
  EXPECT_LT(oracle::max_abs(ph * u.col(2) - u.col(2)), 1e-14);
  const CMatrix basis = complete_basis(u.leftCols(2));
  EXPECT_LT(oracle::max_abs(basis.adjoint() * basis - CMatrix::Identity(4, 4)), 1e-12);
  EXPECT_LT(oracle::max_abs(basis.leftCols(2) - u.leftCols(2)), 1e-14);
}

TEST(Random, HaarUnitaryIsUnitaryAndSeeded) {
  Rng a(99);
  Rng b(99);
  const CMatrix u = haar_unitary(5, a);
  EXPECT_EQ(u, haar_unitary(5, b));
  EXPECT_LT(oracle::max_abs(u.adjoint() * u - CMatrix::Identity(5, 5)), 1e-13);
}
