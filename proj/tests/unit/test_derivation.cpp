#include "envlab/derivation.hpp"
#include "envlab/errors.hpp"
#include "envlab/random.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace envlab;

namespace {

PureState bell() { return equal_amplitude_state(2, "psi1"); }

ProbabilityLabel L(const std::string& s) { return ProbabilityLabel::parse(s); }

DerivationCertificate bell_cert(const std::string& ruleset) {
  const ProtocolTrace t = run_swap_protocol(bell(), {0, 1});
  return solve_ledger(emit_constraints(t, Ruleset::named(ruleset)));
}

std::vector<Rational> branch_values(const DerivationCertificate& cert, Side side, int n, const std::string& id) {
  std::vector<Rational> out;
  for (int k = 0; k < n; ++k) {
    const auto v = cert.value(ProbabilityLabel{side, k, id});
    EXPECT_TRUE(v.has_value()) << k;
    out.push_back(v.value_or(Rational(-1)));
  }
  return out;
}

oracle::LinearSystem to_system(const ConstraintLedger& ledger) {
  oracle::LinearSystem sys;
  for (const auto& c : ledger.constraints()) {
    std::map<std::string, Rational> coef;
    Rational rhs = 0;
    switch (c.kind) {
      case ConstraintKind::Equality:
        coef[c.labels[0].str()] += 1;
        coef[c.labels[1].str()] -= 1;
        break;
      case ConstraintKind::Normalization:
        for (const auto& l : c.labels) coef[l.str()] += 1;
        rhs = 1;
        break;
      case ConstraintKind::Value:
        coef[c.labels[0].str()] += 1;
        rhs = c.value;
        break;
      case ConstraintKind::Aggregate:
        coef[c.labels[0].str()] += 1;
        for (std::size_t i = 1; i < c.labels.size(); ++i) coef[c.labels[i].str()] -= 1;
        break;
    }
    sys.add(coef, rhs);
  }
  return sys;
}

}  // namespace

TEST(RationalSpecTest, ReducesButKeepsTotal) {
  const RationalSpec s({2, 4});
  EXPECT_EQ(s.total, 6);
  EXPECT_EQ(s.reduced_counts, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(s.reduced_total, 3);
  EXPECT_EQ(s.weight(1), make_rational(2, 3));
  EXPECT_THROW(RationalSpec({1, 0}), ValidationError);
  EXPECT_THROW(RationalSpec({1, 2}, 4), ValidationError);
}

TEST(SolveLedger, BellBarnum) {
  const DerivationCertificate c = bell_cert("barnum");
  EXPECT_EQ(c.status, DerivationStatus::Determined);
  EXPECT_EQ(c.value("pS(0|psi1)"), make_rational(1, 2));
  EXPECT_EQ(c.value("pS(1|psi1)"), make_rational(1, 2));
  EXPECT_FALSE(c.justification.empty());
}

TEST(SolveLedger, BellZurek) {
  const DerivationCertificate c = bell_cert("zurek");
  EXPECT_EQ(c.status, DerivationStatus::Determined);
  EXPECT_EQ(c.value("pE(0|psi1)"), make_rational(1, 2));
  EXPECT_EQ(c.value("pE(1|psi1)"), make_rational(1, 2));
}

TEST(SolveLedger, AblationsUnderdetermine) {
  for (const char* name : {"barnum-without-ENV_S_TO_E", "barnum-without-PCP", "zurek-without-PEDANTIC"}) {
    const DerivationCertificate c = bell_cert(name);
    EXPECT_EQ(c.status, DerivationStatus::Underdetermined) << name;
    bool some_free = false;
    for (const auto& [l, v] : c.assignment) {
      if (!v.value) {
        some_free = true;
        EXPECT_EQ(v.lower, 0);
        EXPECT_EQ(v.upper, 1);
      }
    }
    EXPECT_TRUE(some_free) << name;
  }
}

TEST(SolveLedger, Inconsistent) {
  ConstraintLedger ledger;
  ledger.add(Constraint::equality(L("pS(0|a)"), L("pS(1|a)"), Rule::Pcp));
  ledger.add(Constraint::normalization({L("pS(0|a)"), L("pS(1|a)")}));
  ledger.add(Constraint::fixed_value(L("pS(0|a)"), make_rational(1, 3), Rule::FineGrain));
  const DerivationCertificate c = solve_ledger(ledger);
  EXPECT_EQ(c.status, DerivationStatus::Inconsistent);
  ASSERT_FALSE(c.conflict.empty());
  ConstraintLedger sub;
  for (const auto& k : c.conflict) sub.add(k);
  EXPECT_EQ(solve_ledger(sub).status, DerivationStatus::Inconsistent);
}

TEST(SolveLedger, OutOfRangeIsInconsistent) {
  ConstraintLedger ledger;
  ledger.add(Constraint::fixed_value(L("pS(0|a)"), make_rational(3, 2), Rule::FineGrain));
  EXPECT_EQ(solve_ledger(ledger).status, DerivationStatus::Inconsistent);
}

TEST(SolveLedger, AgreesWithDenseOracleOnRandomLedgers) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> names{"pS(0|a)", "pS(1|a)", "pS(2|a)", "pE(0|a)", "pE(1|a)", "pE(2|a)", "pS(0|b)"};
  std::uniform_int_distribution<int> pick(0, static_cast<int>(names.size()) - 1);
  std::uniform_int_distribution<int> kind(0, 9);
  for (int trial = 0; trial < 400; ++trial) {
    ConstraintLedger ledger;
    const int n = 1 + trial % 8;
    for (int i = 0; i < n; ++i) {
      const int k = kind(rng);
      if (k < 5) {
        ledger.add(Constraint::equality(L(names[pick(rng)]), L(names[pick(rng)]), Rule::Pcp));
      } else if (k < 8) {
        std::vector<ProbabilityLabel> ls;
        for (int j = 0, m = 1 + pick(rng) % 3; j < m; ++j) ls.push_back(L(names[pick(rng)]));
        std::sort(ls.begin(), ls.end());
        ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
        ledger.add(Constraint::normalization(ls));
      } else if (k < 9) {
        ledger.add(Constraint::fixed_value(L(names[pick(rng)]), make_rational(pick(rng), 6), Rule::FineGrain));
      } else {
        ledger.add(Constraint::aggregate(L(names[pick(rng)]), {L(names[pick(rng)]), L(names[pick(rng)])},
                                         Rule::FineGrain));
      }
    }
    const DerivationCertificate got = solve_ledger(ledger);
    const auto want = to_system(ledger).solve();
    bool in_range = true;
    bool all = true;
    for (const auto& [name, v] : want.value) {
      if (!v) all = false;
      if (v && (*v < 0 || *v > 1)) in_range = false;
    }
    if (!want.consistent || !in_range) {
      EXPECT_EQ(got.status, DerivationStatus::Inconsistent) << trial;
      continue;
    }
    EXPECT_EQ(got.status, all ? DerivationStatus::Determined : DerivationStatus::Underdetermined) << trial;
    for (const auto& [name, v] : want.value) EXPECT_EQ(got.value(name), v) << trial << " " << name;
  }
}

TEST(EqualCase, Examples) {
  const DerivationCertificate one = derive_equal_case(1);
  EXPECT_EQ(one.status, DerivationStatus::Determined);
  EXPECT_EQ(one.value("pS(0|psi1)"), Rational(1));

  const DerivationCertificate two = derive_equal_case(2);
  EXPECT_EQ(branch_values(two, Side::S, 2, "psi1"), (std::vector<Rational>(2, make_rational(1, 2))));

  const DerivationCertificate five = derive_equal_case(5);
  EXPECT_EQ(five.traces, 4u);
  EXPECT_EQ(branch_values(five, Side::S, 5, "psi1"), (std::vector<Rational>(5, make_rational(1, 5))));
  EXPECT_EQ(branch_values(five, Side::E, 5, "psi1"), (std::vector<Rational>(5, make_rational(1, 5))));
  EXPECT_TRUE(five.born_check.exact_match);
  EXPECT_EQ(five.born_check.max_abs_dev, 0.0);
  EXPECT_THROW(derive_equal_case(0), ValidationError);
}

TEST(EqualCase, ZurekAndBlockLocalAgree) {
  DerivationOptions z;
  z.ruleset = Ruleset::zurek();
  const DerivationCertificate c = derive_equal_case(4, z);
  EXPECT_EQ(branch_values(c, Side::E, 4, "psi1"), (std::vector<Rational>(4, make_rational(1, 4))));

  DerivationOptions small;
  small.max_explicit_protocol_dim = 4;
  const DerivationCertificate b = derive_equal_case(6, small);
  EXPECT_FALSE(b.notes.empty());
  EXPECT_EQ(branch_values(b, Side::S, 6, "psi1"), (std::vector<Rational>(6, make_rational(1, 6))));
}

TEST(FineGrain, OneTwo) {
  const PureState s = rational_diagonal_state({1, 2}, "psi");
  const FineGrained fg = fine_grain(s, RationalSpec({1, 2}));
  EXPECT_EQ(fg.blocks, (std::vector<std::vector<int>>{{0}, {1, 2}}));
  EXPECT_EQ(fg.state.subsystem_count(), 3);
  EXPECT_NEAR(fg.state.amplitudes().squaredNorm(), 1.0, 1e-15);
  // Three branches of weight 1/3 each in the branch frame.
  const CMatrix c = frame_coefficients(fg.bipartite, fg.branch_frame);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(std::norm(c(j, j)), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(c.cwiseAbs2().sum(), 1.0, 1e-14);
  // rho_S unchanged, compared entrywise against the contraction oracle.
  EXPECT_LT(oracle::max_abs(oracle::reduced(fg.state, Side::S) - oracle::reduced(s, Side::S)), 1e-15);
  EXPECT_TRUE(fg.reduced_state_exact);
}

TEST(FineGrain, TrivialSpecs) {
  const FineGrained same = fine_grain(bell(), RationalSpec({1, 1}));
  EXPECT_EQ(same.blocks, (std::vector<std::vector<int>>{{0}, {1}}));
  EXPECT_LT(oracle::max_abs(oracle::reduced(same.state, Side::S) - oracle::reduced(bell(), Side::S)), 1e-15);

  CVector a = CVector::Zero(4);
  a[0] = 1.0;
  const FineGrained single = fine_grain(PureState({2, 2}, a), RationalSpec({1}));
  EXPECT_EQ(single.state.dim(Side::C), 1);
}

TEST(FineGrain, Preconditions) {
  const PureState s = rational_diagonal_state({1, 2}, "psi");
  EXPECT_THROW(fine_grain(s, RationalSpec({1, 1, 1})), Error);
  EXPECT_THROW(fine_grain(bell(), RationalSpec({1, 2})), Error);
  ExactAmplitudes ex{{1, 0, 0, 1}, 2, {1, 1, 1, -1}};
  const PureState phased = PureState::from_exact({2, 2}, ex);
  EXPECT_THROW(derive_rational(phased, RationalSpec({1, 1})), PreconditionError);
}

TEST(Rational, Examples) {
  const DerivationCertificate a = derive_rational(rational_diagonal_state({1, 2}, "psi"), RationalSpec({1, 2}));
  EXPECT_EQ(a.status, DerivationStatus::Determined);
  EXPECT_EQ(branch_values(a, Side::S, 2, "psi"), (std::vector<Rational>{make_rational(1, 3), make_rational(2, 3)}));
  EXPECT_TRUE(a.born_check.exact_match);
  EXPECT_EQ(a.born_check.max_abs_dev, 0.0);

  const DerivationCertificate b =
      derive_rational(rational_diagonal_state({1, 1, 2}, "psi"), RationalSpec({1, 1, 2}));
  EXPECT_EQ(branch_values(b, Side::S, 3, "psi"),
            (std::vector<Rational>{make_rational(1, 4), make_rational(1, 4), make_rational(1, 2)}));

  const DerivationCertificate c = derive_rational(rational_diagonal_state({7}, "psi"), RationalSpec({7}));
  EXPECT_EQ(c.value("pS(0|psi)"), Rational(1));
}

TEST(Rational, AllCompositionsUpToEight) {
  for (int m = 1; m <= 8; ++m) {
    for (const auto& counts : oracle::compositions(m)) {
      const PureState s = rational_diagonal_state(counts, "psi");
      const DerivationCertificate cert = derive_rational(s, RationalSpec(counts));
      ASSERT_EQ(cert.status, DerivationStatus::Determined);
      for (std::size_t k = 0; k < counts.size(); ++k) {
        EXPECT_EQ(cert.value(ProbabilityLabel{Side::S, static_cast<int>(k), "psi"}), make_rational(counts[k], m));
      }
      EXPECT_TRUE(cert.born_check.exact_match);
    }
  }
}

TEST(Rational, AncillaOnS) {
  DerivationOptions o;
  o.ancilla_side = Side::S;
  const DerivationCertificate c = derive_rational(rational_diagonal_state({1, 3}, "psi"), RationalSpec({1, 3}), o);
  EXPECT_EQ(c.status, DerivationStatus::Determined);
  EXPECT_EQ(c.value("pE(1|psi)"), make_rational(3, 4));
  EXPECT_EQ(c.value("pS(1|psi)"), make_rational(3, 4));
}

TEST(Rational, ZurekNeedsTheAncillaOnS) {
  // zurek constrains only E-side labels; with the ancilla on E the coarse
  // outcomes live on S and nothing links the two sides.
  DerivationOptions o;
  o.ruleset = Ruleset::zurek();
  const PureState s = rational_diagonal_state({1, 2}, "psi");
  EXPECT_EQ(derive_rational(s, RationalSpec({1, 2}), o).status, DerivationStatus::Underdetermined);
  o.ancilla_side = Side::S;
  const DerivationCertificate c = derive_rational(s, RationalSpec({1, 2}), o);
  EXPECT_EQ(c.status, DerivationStatus::Determined);
  EXPECT_EQ(c.value("pE(1|psi)"), make_rational(2, 3));
}

TEST(Apportion, Properties) {
  const RationalSpec s = apportion({0.25, 0.75}, 1e-3, 1000);
  EXPECT_EQ(s.total, 4);
  EXPECT_EQ(s.counts, (std::vector<std::int64_t>{1, 3}));
  const double w = std::cos(1.0) * std::cos(1.0);
  const RationalSpec t = apportion({w, 1.0 - w}, 1e-3, 1'000'000);
  EXPECT_EQ(std::accumulate(t.counts.begin(), t.counts.end(), std::int64_t{0}), t.total);
  EXPECT_LT(std::abs(static_cast<double>(t.counts[0]) / t.total - w), 1e-3);
  EXPECT_THROW(apportion({w, 1.0 - w}, 0.0, 1000), DerivationError);
  EXPECT_THROW(apportion({w, 1.0 - w}, 1e-9, 100), DerivationError);
}

TEST(General, CosineSine) {
  const double theta = 1.0;
  CVector a = CVector::Zero(4);
  a[0] = std::cos(theta);
  a[3] = std::sin(theta);
  const DerivationCertificate c = derive_general(PureState({2, 2}, a), 1e-3);
  EXPECT_EQ(c.status, DerivationStatus::Determined);
  EXPECT_FALSE(c.exactness.exact);
  EXPECT_EQ(c.exactness.epsilon, 1e-3);
  ASSERT_TRUE(c.approximant.has_value());
  // Schmidt order puts sin^2 first.
  EXPECT_NEAR(to_double(*c.value("pS(0|psi)")), std::sin(theta) * std::sin(theta), 1e-3);
  EXPECT_NEAR(to_double(*c.value("pS(1|psi)")), std::cos(theta) * std::cos(theta), 1e-3);
  EXPECT_LT(c.born_check.max_abs_dev, 1e-3);
}

TEST(General, RationalInputIsExact) {
  const DerivationCertificate c = derive_general(rational_diagonal_state({1, 2}, "psi"), 0.1);
  EXPECT_TRUE(c.exactness.exact);
  EXPECT_FALSE(c.approximant.has_value());
  EXPECT_TRUE(c.born_check.exact_match);
  EXPECT_EQ(c.value("pS(0|psi)"), make_rational(2, 3));
}

TEST(General, ZeroEpsilonUnachievable) {
  CVector a = CVector::Zero(4);
  a[0] = std::cos(1.0);
  a[3] = std::sin(1.0);
  EXPECT_THROW(derive_general(PureState({2, 2}, a), 0.0), DerivationError);
}

TEST(General, PhasesAreScrubbed) {
  Rng rng(41);
  const PureState s = random_state({3, 3}, rng);
  const DerivationCertificate c = derive_general(s, 1e-2);
  EXPECT_EQ(c.status, DerivationStatus::Determined);
  EXPECT_LT(c.born_check.max_abs_dev, 1e-2);
}

TEST(CertifyTrace, BornCheckOnInitialState) {
  const ProtocolTrace t = run_swap_protocol(bell(), {0, 1});
  const ConstraintLedger ledger = emit_constraints(t, Ruleset::barnum());
  const DerivationCertificate c = certify_trace(t, ledger, Ruleset::barnum());
  EXPECT_EQ(c.status, DerivationStatus::Determined);
  EXPECT_EQ(c.born_check.entries.size(), 4u);
  EXPECT_TRUE(c.born_check.exact_match);
}
