#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pilotwave/wavepacket.hpp"

using namespace pilotwave;

namespace {

const double kPi = std::numbers::pi;

GaussianPacket random_packet(std::mt19937_64& rng, bool evolved) {
  std::uniform_real_distribution<double> c(-3, 3), s(0.2, 2), k(-4, 4), ph(-kPi, kPi), t(0, 3);
  auto p = GaussianPacket::make(c(rng), s(rng), k(rng), ph(rng));
  return evolved ? free_evolve(p, 1.0, 1.3, t(rng)) : p;
}

}  // namespace

TEST(Evaluate, PeakIsNormalizer) {
  const auto p = GaussianPacket::make(0, 1);
  const auto v = evaluate(p, 0.0);
  EXPECT_NEAR(v.real(), std::pow(2 * kPi, -0.25), 1e-15);
  EXPECT_EQ(v.imag(), 0.0);
}

TEST(Evaluate, NormalizedOnTenSigmaGrid) {
  for (double sigma : {0.25, 1.0, 3.0}) {
    const auto p = GaussianPacket::make(1.5, sigma, 2.0, 0.4);
    const double n = oracle::trapezoid([&](double x) { return density(p, x); }, 1.5 - 10 * sigma, 1.5 + 10 * sigma, 4000);
    EXPECT_NEAR(n, 1.0, 1e-6);
  }
}

TEST(Evaluate, FarTail) {
  const auto p = GaussianPacket::make(0, 1);
  EXPECT_LT(std::abs(evaluate(p, 10.0)), 1e-10 * std::pow(2 * kPi, -0.25));
}

TEST(Evaluate, MatchesTextbookFreeGaussian) {
  const oracle::FreeGaussian g{0.7, 0.6, 1.8, 1.0, 2.5};
  const auto p0 = GaussianPacket::make(0.7, 0.6, 1.8);
  for (double t : {0.0, 0.3, 2.0, 7.5}) {
    const auto p = free_evolve(p0, 1.0, 2.5, t);
    for (double x = -5; x <= 12; x += 0.37) EXPECT_LT(std::abs(evaluate(p, x) - g(x, t)), 1e-12) << t << " " << x;
  }
}

TEST(Gradient, ZeroAtRealPeak) {
  EXPECT_EQ(std::abs(gradient(GaussianPacket::make(2, 0.5), 2.0)), 0.0);
}

TEST(Gradient, PlaneWaveCurrent) {
  const auto p = GaussianPacket::make(0.3, 0.8, 2.75, 1.1);
  for (double x = -2; x <= 2; x += 0.25) {
    const double j = std::imag(std::conj(evaluate(p, x)) * gradient(p, x));
    EXPECT_NEAR(j, 2.75 * density(p, x), 1e-13);
  }
}

TEST(Gradient, MatchesFiniteDifference) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_packet(rng, i % 2 == 1);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    const double x = p.current_center() + u(rng) * p.current_sigma();
    const double h = 1e-5 * p.sigma;
    const auto fd = (evaluate(p, x + h) - evaluate(p, x - h)) / (2 * h);
    const auto g = gradient(p, x);
    const double scale = std::max(std::abs(g), std::abs(evaluate(p, x)) / p.current_sigma());
    EXPECT_LT(std::abs(g - fd) / scale, 1e-6) << i;
  }
}

TEST(Support, ContainsAndExcludes) {
  const auto p = GaussianPacket::make(1, 0.5);
  EXPECT_TRUE(support_contains(p, 1.0));
  EXPECT_FALSE(support_contains(p, 1 + 6 * 0.5, 5.0));
  EXPECT_TRUE(support_contains(p, 1 + 5 * 0.5, 5.0));
}

TEST(Support, DisjointExamples) {
  const auto a = GaussianPacket::make(0, 1);
  EXPECT_TRUE(disjoint(a, GaussianPacket::make(20, 1), 5.0));
  EXPECT_FALSE(disjoint(a, a, 5.0));
  // Touching closed intervals count as overlapping.
  EXPECT_FALSE(disjoint(a, GaussianPacket::make(10, 1), 5.0));
  EXPECT_TRUE(disjoint(a, GaussianPacket::make(10.000001, 1), 5.0));
}

TEST(Support, TwentySigmaApartShareNoPoint) {
  const auto a = GaussianPacket::make(0, 0.25);
  const auto b = GaussianPacket::make(5, 0.25);
  for (double x = -3; x <= 8; x += 1e-3) EXPECT_FALSE(support_contains(a, x) && support_contains(b, x));
}

TEST(FreeEvolve, IdentityAtBirth) {
  const auto p = GaussianPacket::make(1, 0.5, 3, 0.2, 2.0);
  const auto q = free_evolve(p, 1.0, 1.0, 2.0);
  for (double x = -1; x <= 3; x += 0.1) EXPECT_EQ(evaluate(p, x), evaluate(q, x));
}

TEST(FreeEvolve, CenterMovesAtGroupVelocity) {
  const auto p = GaussianPacket::make(-1, 0.5, 3);
  const auto q = free_evolve(p, 1.0, 2.0, 4.0);
  EXPECT_NEAR(q.current_center(), -1 + 3.0 / 2.0 * 4.0, 1e-14);
}

TEST(FreeEvolve, WidthDoublesAtRootThree) {
  const double sigma = 0.7, m = 1.6, hbar = 1.1;
  const double t = std::sqrt(3.0) * 2 * m * sigma * sigma / hbar;
  EXPECT_NEAR(free_evolve(GaussianPacket::make(0, sigma), hbar, m, t).current_sigma(), 2 * sigma, 1e-14);
}

TEST(FreeEvolve, RealPacketDensityIsGaussianOfWidthSigmaT) {
  const auto p0 = GaussianPacket::make(0.4, 0.5);
  for (double t : {0.2, 1.0, 5.0}) {
    const auto p = free_evolve(p0, 1.0, 1.0, t);
    const double st = oracle::FreeGaussian{0.4, 0.5, 0, 1, 1}.width(t);
    for (double z = -4; z <= 4; z += 0.5) {
      const double x = 0.4 + z * st;
      const double expected = std::exp(-z * z / 2) / (std::sqrt(2 * kPi) * st);
      EXPECT_NEAR(density(p, x) / expected, 1.0, 1e-8);
    }
  }
}

TEST(FreeEvolve, PreservesNorm) {
  const auto p = free_evolve(GaussianPacket::make(0, 0.3, 5), 1.0, 1.0, 2.0);
  const double c = p.current_center(), s = p.current_sigma();
  EXPECT_NEAR(oracle::trapezoid([&](double x) { return density(p, x); }, c - 12 * s, c + 12 * s, 8000), 1.0, 1e-6);
}

TEST(FreeEvolve, Composition) {
  const auto p = GaussianPacket::make(0.2, 0.4, -1.5, 0.3);
  const auto direct = free_evolve(p, 1.0, 0.7, 2.5);
  const auto twice = free_evolve(free_evolve(p, 1.0, 0.7, 1.1), 1.0, 0.7, 2.5);
  for (double x = -8; x <= 4; x += 0.2) EXPECT_LT(std::abs(evaluate(direct, x) - evaluate(twice, x)), 1e-9);
}

TEST(FreeEvolve, Errors) {
  const auto p = GaussianPacket::make(0, 1, 0, 0, 1.0);
  EXPECT_THROW(free_evolve(p, 1.0, 1.0, 0.5), Error);
  EXPECT_THROW(free_evolve(p, 1.0, 0.0, 2.0), Error);
  EXPECT_THROW(GaussianPacket::make(0, 0), Error);
  EXPECT_THROW(free_evolve(free_evolve(p, 1.0, 1.0, 2.0), 1.0, 2.0, 3.0), Error);
}

TEST(FreeEvolve, MatchesCrankNicolsonAtDoubledWidth) {
  const double hbar = 1, m = 1, sigma = 1;
  const double t = std::sqrt(3.0) * 2 * m * sigma * sigma / hbar;
  const double lo = -30, hi = 30, dx = 0.002;
  const int n = static_cast<int>((hi - lo) / dx) + 1;
  const auto p0 = GaussianPacket::make(0, sigma);
  std::vector<oracle::C> psi(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) psi[static_cast<std::size_t>(i)] = evaluate(p0, lo + i * dx);
  const int steps = 1732;
  const auto out = oracle::crank_nicolson(psi, dx, t / steps, steps, hbar, m);
  const auto pt = free_evolve(p0, hbar, m, t);
  double err2 = 0;
  for (int i = 0; i < n; ++i) err2 += std::norm(out[static_cast<std::size_t>(i)] - evaluate(pt, lo + i * dx)) * dx;
  EXPECT_LT(std::sqrt(err2), 1e-6);
  EXPECT_NEAR(pt.current_sigma(), 2 * sigma, 1e-14);
}

TEST(Overlap, MatchesQuadrature) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i) {
    const auto a = random_packet(rng, i % 3 == 0);
    const auto b = random_packet(rng, i % 2 == 0);
    const double lo = std::min(a.current_center(), b.current_center()) - 15;
    const double hi = std::max(a.current_center(), b.current_center()) + 15;
    const auto q = oracle::trapezoid_c([&](double x) { return std::conj(evaluate(a, x)) * evaluate(b, x); }, lo, hi, 60000);
    EXPECT_LT(std::abs(overlap(a, b) - q), 1e-8) << i;
  }
  const auto p = GaussianPacket::make(0, 1, 2);
  EXPECT_NEAR(std::abs(overlap(p, p) - 1.0), 0, 1e-14);
}
