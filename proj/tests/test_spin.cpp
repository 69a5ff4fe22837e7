#include <array>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pilotwave/error.hpp"
#include "pilotwave/spin.hpp"
#include "pilotwave/spin_expr.hpp"

using namespace pilotwave;

namespace {

constexpr double kTol = 1e-12;
const double kR = 1.0 / std::sqrt(2.0);

oracle::Ket to_ket(const InternalState& s) {
  oracle::Ket k;
  for (const auto& t : s.terms(1e-15)) {
    std::string labels;
    for (auto l : t.labels) labels += to_char(l);
    k[labels] = t.amplitude;
  }
  return k;
}

InternalState alpha12_alpha34() {
  return tensor(bell_state(BellKind::Alpha, 1, 2), bell_state(BellKind::Alpha, 3, 4));
}

InternalState random_state(std::mt19937_64& rng, std::vector<int> slots) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(1 << slots.size());
  for (auto& x : v) x = {g(rng), g(rng)};
  v.normalize();
  return InternalState(std::move(slots), v);
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Parse;  // sentinel: nothing thrown
}

}  // namespace

TEST(BellState, AlphaOnOneTwo) {
  const auto s = bell_state(BellKind::Alpha, 1, 2, 2);
  const std::array ab{SpinLabel::A, SpinLabel::B}, ba{SpinLabel::B, SpinLabel::A};
  EXPECT_NEAR(std::abs(s.amplitude(ab) - kR), 0, kTol);
  EXPECT_NEAR(std::abs(s.amplitude(ba) - kR), 0, kTol);
  EXPECT_NEAR(s.norm_squared(), 1.0, kTol);
}

TEST(BellState, DeltaHasMinusOnBB) {
  const auto s = bell_state(BellKind::Delta, 1, 2, 2);
  const std::array aa{SpinLabel::A, SpinLabel::A}, bb{SpinLabel::B, SpinLabel::B};
  EXPECT_NEAR(std::abs(s.amplitude(aa) - kR), 0, kTol);
  EXPECT_NEAR(std::abs(s.amplitude(bb) + kR), 0, kTol);
}

TEST(BellState, InvalidSlots) {
  EXPECT_EQ(kind_of([] { bell_state(BellKind::Alpha, 1, 1); }), ErrorKind::InvalidSlot);
  EXPECT_EQ(kind_of([] { bell_state(BellKind::Alpha, 0, 2); }), ErrorKind::InvalidSlot);
  EXPECT_EQ(kind_of([] { bell_state(BellKind::Alpha, 1, 5, 4); }), ErrorKind::InvalidSlot);
}

TEST(BellState, Orthonormal) {
  for (auto m : kBellKinds) {
    for (auto n : kBellKinds) {
      const Complex ip = inner_product(bell_state(m, 2, 4), bell_state(n, 2, 4));
      EXPECT_NEAR(std::abs(ip - Complex(m == n ? 1.0 : 0.0)), 0, kTol);
    }
  }
}

TEST(BellState, MatchesKetOracle) {
  for (int m = 0; m < 4; ++m) {
    const auto k = to_ket(bell_state(kBellKinds[m], 1, 2));
    const auto expected = oracle::bell(m);
    EXPECT_NEAR(std::abs(oracle::inner(expected, k)), 1.0, kTol);
    EXPECT_NEAR(std::abs(oracle::inner(expected, expected) - oracle::inner(k, k)), 0, kTol);
  }
}

TEST(Tensor, AlphaAlphaHasFourQuarterTerms) {
  const auto s = alpha12_alpha34();
  const auto terms = s.terms(1e-15);
  ASSERT_EQ(terms.size(), 4u);
  for (const auto& t : terms) EXPECT_NEAR(std::abs(t.amplitude - 0.5), 0, kTol);
  EXPECT_EQ(render(s), "0.5(a1 b2 + b1 a2)(a3 b4 + b3 a4)");
}

TEST(Tensor, BasisProduct) {
  const auto a1 = InternalState::basis({{1, SpinLabel::A}});
  const auto b2 = InternalState::basis({{2, SpinLabel::B}});
  const auto p = tensor(a1, b2);
  const auto terms = p.terms();
  ASSERT_EQ(terms.size(), 1u);
  EXPECT_EQ(terms[0].labels, (std::vector{SpinLabel::A, SpinLabel::B}));
  EXPECT_EQ(terms[0].amplitude, Complex(1.0));
}

TEST(Tensor, SingleStateIsItself) {
  const std::array one{bell_state(BellKind::Gamma, 1, 3)};
  EXPECT_TRUE(tensor(one).approx_equal(one[0]));
}

TEST(Tensor, OverlappingSlotsRejected) {
  EXPECT_EQ(kind_of([] { tensor(bell_state(BellKind::Alpha, 1, 2), bell_state(BellKind::Beta, 2, 3)); }),
            ErrorKind::OverlappingSlots);
}

TEST(InnerProduct, Examples) {
  const auto a1b2 = InternalState::basis({{1, SpinLabel::A}, {2, SpinLabel::B}});
  EXPECT_NEAR(std::abs(inner_product(a1b2, bell_state(BellKind::Alpha, 1, 2)) - kR), 0, kTol);
  EXPECT_NEAR(std::abs(inner_product(bell_state(BellKind::Alpha, 1, 2), bell_state(BellKind::Beta, 1, 2))), 0, kTol);
  EXPECT_EQ(kind_of([&] { inner_product(a1b2, alpha12_alpha34()); }), ErrorKind::SlotCountMismatch);
}

TEST(InnerProduct, ConjugateLinearInFirst) {
  const auto s = bell_state(BellKind::Alpha, 1, 2);
  const Complex c(0.3, 0.7);
  EXPECT_NEAR(std::abs(inner_product(c * s, s) - std::conj(c)), 0, kTol);
  EXPECT_NEAR(std::abs(inner_product(s, c * s) - c), 0, kTol);
}

// ---------------------------------------------------------------------------

TEST(BellDecompose, AlphaAlphaIdentity) {
  const auto c = bell_decompose(alpha12_alpha34(), {1, 3}, {2, 4});
  Eigen::Matrix4cd expected = Eigen::Matrix4cd::Zero();
  expected.diagonal() << 0.5, -0.5, 0.5, -0.5;
  EXPECT_LT((c - expected).cwiseAbs().maxCoeff(), kTol);
}

TEST(BellDecompose, AlreadyInPairBasis) {
  const auto s = tensor(bell_state(BellKind::Alpha, 1, 3), bell_state(BellKind::Alpha, 2, 4));
  const auto c = bell_decompose(s, {1, 3}, {2, 4});
  Eigen::Matrix4cd expected = Eigen::Matrix4cd::Zero();
  expected(0, 0) = 1.0;
  EXPECT_LT((c - expected).cwiseAbs().maxCoeff(), kTol);
}

TEST(BellDecompose, AllAMatchesBruteForce) {
  const auto s = InternalState::basis({{1, SpinLabel::A}, {2, SpinLabel::A}, {3, SpinLabel::A}, {4, SpinLabel::A}});
  const auto c = bell_decompose(s, {1, 3}, {2, 4});
  const auto ket = to_ket(s);
  for (int m = 0; m < 4; ++m) {
    for (int n = 0; n < 4; ++n) {
      const Complex want = oracle::bell_coefficient(ket, m, n, 1, 3, 2, 4);
      EXPECT_NEAR(std::abs(c(m, n) - want), 0, kTol) << m << "," << n;
    }
  }
  // gamma/delta pairs only, each 1/2.
  for (int m = 2; m < 4; ++m) {
    for (int n = 2; n < 4; ++n) EXPECT_NEAR(std::abs(c(m, n) - 0.5), 0, kTol);
  }
}

TEST(BellDecompose, RandomStatesMatchBruteForceAndRoundTrip) {
  std::mt19937_64 rng(7);
  const std::array<std::pair<std::pair<int, int>, std::pair<int, int>>, 3> pairings{
      {{{1, 3}, {2, 4}}, {{1, 2}, {3, 4}}, {{1, 4}, {2, 3}}}};
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_state(rng, {1, 2, 3, 4});
    const auto ket = to_ket(s);
    for (const auto& [p1, p2] : pairings) {
      const auto c = bell_decompose(s, p1, p2);
      for (int m = 0; m < 4; ++m) {
        for (int n = 0; n < 4; ++n) {
          const Complex want = oracle::bell_coefficient(ket, m, n, p1.first, p1.second, p2.first, p2.second);
          ASSERT_NEAR(std::abs(c(m, n) - want), 0, kTol);
        }
      }
      EXPECT_NEAR(c.squaredNorm(), s.norm_squared(), kTol);
      EXPECT_TRUE(bell_recompose(c, p1, p2).approx_equal(s, kTol));
    }
  }
}

TEST(BellDecompose, Errors) {
  EXPECT_EQ(kind_of([] { bell_decompose(bell_state(BellKind::Alpha, 1, 2), {1, 3}, {2, 4}); }),
            ErrorKind::NotFourSlot);
  EXPECT_EQ(kind_of([] { bell_decompose(alpha12_alpha34(), {1, 3}, {3, 4}); }), ErrorKind::OverlappingSlots);
}

// ---------------------------------------------------------------------------

TEST(ReducedDensity, EqualBellMixtureIsMaximallyMixed) {
  std::vector<std::pair<double, InternalState>> mix;
  for (auto k : kBellKinds) mix.emplace_back(0.25, bell_state(k, 2, 4));
  const std::array keep{2, 4};
  const auto rho = reduced_density(mix, keep);
  EXPECT_LT((rho.entries() - 0.25 * Eigen::Matrix4cd::Identity()).cwiseAbs().maxCoeff(), kTol);
}

TEST(ReducedDensity, ProductAndBellMarginals) {
  const std::array keep{1};
  const auto a1a2 = InternalState::basis({{1, SpinLabel::A}, {2, SpinLabel::A}});
  Eigen::Matrix2cd diag10 = Eigen::Matrix2cd::Zero();
  diag10(0, 0) = 1;
  EXPECT_LT((reduced_density(a1a2, keep).entries() - diag10).cwiseAbs().maxCoeff(), kTol);
  const auto rho = reduced_density(bell_state(BellKind::Alpha, 1, 2), keep);
  EXPECT_LT((rho.entries() - 0.5 * Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff(), kTol);
}

TEST(ReducedDensity, Errors) {
  const std::vector<int> none;
  const std::array all{1, 2};
  const auto s = bell_state(BellKind::Alpha, 1, 2);
  EXPECT_EQ(kind_of([&] { reduced_density(s, none); }), ErrorKind::EmptyKeep);
  EXPECT_EQ(kind_of([&] { reduced_density(s, all); }), ErrorKind::KeepAll);
}

TEST(ReducedDensity, PureStatesGiveValidDensities) {
  std::mt19937_64 rng(11);
  const std::vector<std::vector<int>> keeps{{1}, {2, 4}, {1, 2, 3}, {3}};
  for (int trial = 0; trial < 25; ++trial) {
    const auto s = random_state(rng, {1, 2, 3, 4});
    for (const auto& k : keeps) {
      const auto rho = reduced_density(s, k);
      EXPECT_NEAR(rho.entries().trace().real(), 1.0, kTol);
      const auto ev = rho.eigenvalues();
      EXPECT_GE(ev.minCoeff(), -1e-10);
      EXPECT_LE(ev.maxCoeff(), 1 + 1e-10);
      EXPECT_TRUE(rho.is_valid());
    }
  }
}

// ---------------------------------------------------------------------------

TEST(Entanglement, ProductAcrossPairs) {
  const std::array a{1, 2}, b{3, 4};
  EXPECT_FALSE(is_entangled(alpha12_alpha34(), a, b));
}

// The state alpha(1,2) alpha(3,4) is pure, so the Schmidt rank across
// {1,3}|{2,4} is 4 (it equals an equal-weight Bell superposition there).
// What is separable is each pair's reduced state: 1 with 3, and 2 with 4.
TEST(Entanglement, CrossPairsPureSchmidtVersusReducedPairs) {
  const auto s = alpha12_alpha34();
  const std::array a{1, 3}, b{2, 4};
  EXPECT_EQ(schmidt_rank(s, a, b), 4);
  EXPECT_TRUE(is_entangled(s, a, b));
  EXPECT_FALSE(pair_entangled(s, 1, 3));
  EXPECT_FALSE(pair_entangled(s, 2, 4));
  const auto rho13 = reduced_density(s, a);
  const std::array one{1}, three{3};
  EXPECT_FALSE(is_entangled(rho13, one, three));
}

TEST(Entanglement, BellPairIsEntangled) {
  const std::array a{2}, b{4};
  EXPECT_TRUE(is_entangled(bell_state(BellKind::Alpha, 2, 4), a, b));
  EXPECT_TRUE(pair_entangled(alpha12_alpha34(), 1, 2));
}

TEST(Entanglement, BadPartition) {
  const std::array a{1, 2};
  const std::array b{3};
  EXPECT_EQ(kind_of([&] { is_entangled(alpha12_alpha34(), a, b); }), ErrorKind::BadPartition);
}

TEST(Entanglement, PptAgreesWithSchmidtOnPureTwoQubit) {
  std::mt19937_64 rng(3);
  const std::array a{1}, b{2};
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_state(rng, {1, 2});
    EXPECT_EQ(is_entangled(pure_density(s), a, b), is_entangled(s, a, b));
  }
}

// ---------------------------------------------------------------------------

TEST(PartialInner, ProjectsOntoRemainingSlots) {
  const auto s = tensor(bell_state(BellKind::Beta, 1, 3), bell_state(BellKind::Gamma, 2, 4));
  const auto rest = partial_inner(bell_state(BellKind::Beta, 1, 3), s);
  EXPECT_EQ(rest.slots(), (std::vector{2, 4}));
  EXPECT_TRUE(rest.approx_equal(bell_state(BellKind::Gamma, 2, 4)));
}

TEST(ProjectBellPair, ComponentsSumToState) {
  const auto s = alpha12_alpha34();
  InternalState sum = project_bell_pair(s, BellKind::Alpha, 1, 3);
  for (int m = 1; m < 4; ++m) sum = sum + project_bell_pair(s, kBellKinds[m], 1, 3);
  EXPECT_TRUE(sum.approx_equal(s));
  EXPECT_NEAR(project_bell_pair(s, BellKind::Beta, 1, 3).norm_squared(), 0.25, kTol);
}

TEST(ProjectSlot, HalvesBellNorm) {
  const auto p = project_slot(bell_state(BellKind::Alpha, 1, 2), 1, SpinLabel::A);
  EXPECT_NEAR(p.norm_squared(), 0.5, kTol);
}

// ---------------------------------------------------------------------------

TEST(ParseState, BellProductMatchesConstruction) {
  EXPECT_TRUE(parse_state("alpha(1,2)*alpha(3,4)").approx_equal(alpha12_alpha34()));
  EXPECT_TRUE(parse_state("alpha(1,2) alpha(3,4)").approx_equal(alpha12_alpha34()));
}

TEST(ParseState, LabelNotation) {
  EXPECT_TRUE(parse_state("0.5(a1 b2 + b1 a2)(a3 b4 + b3 a4)").approx_equal(alpha12_alpha34()));
  EXPECT_TRUE(parse_state("(a1 a2 - b1 b2)/sqrt(2)").approx_equal(bell_state(BellKind::Delta, 1, 2)));
}

TEST(ParseState, ErrorCarriesColumn) {
  try {
    parse_state("alpha(1,2) * + beta(3,4)");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_EQ(e.column(), 13u);
    const std::string caret = e.caret("alpha(1,2) * + beta(3,4)");
    EXPECT_NE(caret.find("\n             ^"), std::string::npos) << caret;
  }
}
