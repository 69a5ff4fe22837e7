#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pilotwave/guidance.hpp"
#include "pilotwave/protocol.hpp"

using namespace pilotwave;

namespace {

InternalState spin(int slot, SpinLabel l) { return InternalState::basis({{slot, l}}); }

WaveFunction single(const GaussianPacket& p, double mass = 1.0) {
  return WaveFunction(DofRegistry({{"x", DofRole::Particle, mass}}), {Branch{1.0, spin(1, SpinLabel::A), {p}, "psi"}});
}

Configuration at(std::initializer_list<double> xs) {
  Configuration c(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) c[i++] = x;
  return c;
}

/// (hbar/m)(k + Im(-(x - c)/(2 s))) for one evolved packet.
double packet_field(const GaussianPacket& p, double x, double hbar, double m) {
  return hbar / m * (p.wavenumber + std::imag(-(x - p.current_center()) / (2.0 * p.width_squared())));
}

}  // namespace

TEST(Velocity, RealGaussianIsAtRest) {
  const auto psi = single(GaussianPacket::make(0.5, 0.3));
  const PhysicalParams params{1.0, {1.0}};
  for (double x = -0.5; x <= 1.5; x += 0.1) EXPECT_EQ(velocity(psi, at({x}), 0, params), 0.0);
}

TEST(Velocity, PlaneWavePacketMovesAtHbarKOverM) {
  const auto psi = single(GaussianPacket::make(0, 0.5, 3.0), 2.0);
  const PhysicalParams params{1.5, {2.0}};
  for (double x = -1; x <= 1; x += 0.1) EXPECT_NEAR(velocity(psi, at({x}), 0, params), 1.5 * 3.0 / 2.0, 1e-14);
}

TEST(Velocity, SpreadingPacketMatchesClosedFormAndFiniteDifference) {
  const double hbar = 1.0, m = 0.8;
  const auto p0 = GaussianPacket::make(0.3, 0.4, 1.2);
  const oracle::FreeGaussian g{0.3, 0.4, 1.2, hbar, m};
  for (double t : {0.0, 0.5, 2.0}) {
    const auto p = free_evolve(p0, hbar, m, t);
    const auto psi = single(p, m);
    const PhysicalParams params{hbar, {m}};
    for (double z = -3; z <= 3; z += 0.25) {
      const double x = p.current_center() + z * p.current_sigma();
      const double v = velocity(psi, at({x}), 0, params);
      EXPECT_NEAR(v, packet_field(p, x, hbar, m), 1e-10);
      EXPECT_NEAR(v, oracle::fd_velocity(g, x, t, hbar, m), 1e-6);
    }
  }
}

TEST(Velocity, OrthogonalInternalStatesCancelCrossTerms) {
  const DofRegistry reg({{"x", DofRole::Particle, 1.0}});
  const auto p1 = GaussianPacket::make(-0.3, 0.6, 2.0);
  const auto p2 = GaussianPacket::make(0.4, 0.5, -1.0, 0.7);
  const Complex a1(0.6, 0.0), a2(0.0, 0.8);
  const WaveFunction psi(reg, {Branch{a1, spin(1, SpinLabel::A), {p1}, "a"}, Branch{a2, spin(1, SpinLabel::B), {p2}, "b"}});
  const PhysicalParams params{1.0, {1.0}};
  for (double x = -1.5; x <= 1.5; x += 0.1) {
    const Complex v1 = evaluate(p1, x), v2 = evaluate(p2, x);
    const double num = std::norm(a1) * std::imag(std::conj(v1) * gradient(p1, x)) +
                       std::norm(a2) * std::imag(std::conj(v2) * gradient(p2, x));
    const double den = std::norm(a1) * std::norm(v1) + std::norm(a2) * std::norm(v2);
    EXPECT_NEAR(velocity(psi, at({x}), 0, params), num / den, 1e-12);
  }
}

TEST(Velocity, SameInternalStateInterferes) {
  const DofRegistry reg({{"x", DofRole::Particle, 1.0}});
  const auto p1 = GaussianPacket::make(-0.3, 0.6, 2.0);
  const auto p2 = GaussianPacket::make(0.4, 0.5, -1.0, 0.7);
  const Complex a1(0.6, 0.0), a2(0.0, 0.8);
  const auto s = spin(1, SpinLabel::A);
  const WaveFunction psi(reg, {Branch{a1, s, {p1}, "a"}, Branch{a2, s, {p2}, "b"}});
  const PhysicalParams params{1.0, {1.0}};
  for (double x = -1.5; x <= 1.5; x += 0.1) {
    const Complex f = a1 * evaluate(p1, x) + a2 * evaluate(p2, x);
    const Complex df = a1 * gradient(p1, x) + a2 * gradient(p2, x);
    EXPECT_NEAR(velocity(psi, at({x}), 0, params), std::imag(std::conj(f) * df) / std::norm(f), 1e-10);
  }
}

TEST(Velocity, NullRegionIsAnError) {
  const auto psi = single(GaussianPacket::make(0, 0.1));
  try {
    velocity(psi, at({50}), 0, PhysicalParams{1.0, {1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NullRegion);
  }
}

TEST(Velocity, EffectiveLocality) {
  const auto s = moving_exchange_scenario();
  const auto params = s.params();
  std::mt19937_64 rng(8);
  for (std::size_t last = 0; last < 3; ++last) {
    const double t = s.events[last].time + 0.4;
    const auto psi = free_evolve(wavefunction_after(s, last), s.hbar, t);
    for (int i = 0; i < 200; ++i) {
      const auto c = sample_configuration(psi, rng);
      const auto full = velocities(psi, c, params);
      const auto local = velocities(effective_branches(psi, c), c, params);
      EXPECT_LT((full - local).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

// With particle 2 in the a-packet after both spin measurements, particle 4
// is guided as if its state were the b-packet alone.
TEST(Velocity, PartnerFieldCollapsesToSingleParticleField) {
  const auto s = moving_exchange_scenario();
  const auto params = s.params();
  const double t = 3.5;
  const auto psi = free_evolve(wavefunction_after(s, 2), s.hbar, t);
  const auto phi4b = [&] {
    auto p = s.packet("phi4_b");
    p.born_at = 3.0;
    return free_evolve(p, params, 3, t);
  }();
  const auto centre = [&](const std::string& name, std::size_t dof, double born) {
    auto p = s.packet(name);
    p.born_at = born;
    return free_evolve(p, params, dof, t).current_center();
  };
  Configuration c(5);
  c << centre("phi1_bin", 0, 1), centre("phi2_a", 1, 2), centre("phi3_bin", 2, 1), 0, centre("psi_alpha", 4, 1);
  const double lo = phi4b.current_center() - 5 * phi4b.current_sigma();
  const double hi = phi4b.current_center() + 5 * phi4b.current_sigma();
  double max_err = 0;
  for (int i = 0; i < 100; ++i) {
    c[3] = lo + (hi - lo) * (i + 0.5) / 100;
    const double v = velocity(psi, c, 3, params);
    max_err = std::max(max_err, std::abs(v - packet_field(phi4b, c[3], s.hbar, params.mass(3))));
  }
  EXPECT_LT(max_err, 1e-10);
}

TEST(Step, ZeroFieldLeavesConfigurationUnchanged) {
  const auto psi = initial_wavefunction(default_exchange_scenario());
  const auto c = at({0.1, -0.2, 0.05, 0.3, -0.1});
  const auto params = default_exchange_scenario().params();
  EXPECT_EQ(step(psi, c, 0.1, params), c);
}

TEST(Step, UniformFieldIsExact) {
  const DofRegistry reg({{"x", DofRole::Particle, 2.0}, {"y", DofRole::Particle, 0.5}});
  const WaveFunction psi(reg, {Branch{1.0, spin(1, SpinLabel::A),
                                      {GaussianPacket::make(0, 1, 3), GaussianPacket::make(1, 1, -1)}, "p"}});
  const PhysicalParams params = reg.physical_params(1.0);
  const auto c = at({0.2, 0.9});
  const auto next = step(psi, c, 0.01, params);
  EXPECT_NEAR(next[0], 0.2 + 1.5 * 0.01, 1e-12);
  EXPECT_NEAR(next[1], 0.9 - 2.0 * 0.01, 1e-12);
}

TEST(Trajectory, FrozenRealPacketsStayPut) {
  const auto psi = initial_wavefunction(default_exchange_scenario());
  const auto c = at({0.1, -0.2, 0.05, 0.3, -0.1});
  const auto traj = evolve_trajectory(WaveProvider::frozen(psi), c, 0, 1, 0.1, default_exchange_scenario().params());
  ASSERT_EQ(traj.times.size(), 11u);
  EXPECT_DOUBLE_EQ(traj.times.back(), 1.0);
  for (const auto& st : traj.states) EXPECT_EQ(st, c);
  for (const auto& id : traj.branch_ids) EXPECT_EQ(id, "psi");
}

TEST(Trajectory, LastStepLandsOnEndTime) {
  const auto psi = single(GaussianPacket::make(0, 1, 1));
  const auto traj = evolve_trajectory(WaveProvider::frozen(psi), at({0}), 0, 1.05, 0.1, PhysicalParams{1, {1}});
  EXPECT_DOUBLE_EQ(traj.times.back(), 1.05);
  EXPECT_NEAR(traj.states.back()[0], 1.05, 1e-12);
  for (std::size_t i = 1; i < traj.times.size(); ++i) EXPECT_GT(traj.times[i], traj.times[i - 1]);
}

TEST(Trajectory, LeavingTheSupportIsReported) {
  // A frozen packet with momentum carries the particle out of its own support.
  const auto psi = single(GaussianPacket::make(0, 0.1, 10));
  try {
    evolve_trajectory(WaveProvider::frozen(psi), at({0}), 0, 1, 0.01, PhysicalParams{1, {1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NullRegion);
    EXPECT_NE(std::string(e.what()).find("t = "), std::string::npos);
  }
}

TEST(Trajectory, ScalingSolutionOfSpreadingPacket) {
  const double hbar = 1, m = 1, sigma = 0.5;
  const auto p0 = GaussianPacket::make(0, sigma);
  const oracle::FreeGaussian g{0, sigma, 0, hbar, m};
  const auto provider = WaveProvider::free(single(p0, m), hbar);
  const double t1 = 2.0;
  for (double x0 : {-1.0, -0.3, 0.2, 0.9}) {
    const auto traj = evolve_trajectory(provider, at({x0}), 0, t1, 0.01, PhysicalParams{hbar, {m}});
    const double x = traj.states.back()[0];
    const double dense = oracle::integrate_path(
        [&](double y, double t) { return oracle::fd_velocity(g, y, t, hbar, m); }, x0, 0, t1, 20000);
    EXPECT_NEAR(x / dense, 1.0, 1e-4) << x0;
    EXPECT_NEAR(x / (x0 * g.width(t1) / sigma), 1.0, 1e-8) << x0;
  }
}

TEST(Trajectory, Deterministic) {
  const auto s = moving_exchange_scenario();
  const auto psi = free_evolve(wavefunction_after(s, 0), s.hbar, 1.0);
  std::mt19937_64 r1(5), r2(5);
  const auto c1 = sample_configuration(psi, r1), c2 = sample_configuration(psi, r2);
  const auto provider = WaveProvider::free(effective_branches(psi, c1), s.hbar);
  const auto a = evolve_trajectory(provider, c1, 1.0, 2.0, 0.01, s.params());
  const auto b = evolve_trajectory(provider, c2, 1.0, 2.0, 0.01, s.params());
  ASSERT_EQ(a.states.size(), b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_EQ(a.states[i], b.states[i]);
}

TEST(Trajectory, CustomProviderMatchesFree) {
  const auto p0 = GaussianPacket::make(0, 0.5, 1);
  const auto psi = single(p0);
  const auto custom = WaveProvider::custom([&](double t) { return free_evolve(psi, 1.0, t); });
  const PhysicalParams params{1, {1}};
  const auto a = evolve_trajectory(custom, at({0.3}), 0, 1, 0.05, params);
  const auto b = evolve_trajectory(WaveProvider::free(psi, 1.0), at({0.3}), 0, 1, 0.05, params);
  EXPECT_EQ(a.states.back(), b.states.back());
}

TEST(DefaultDt, FiftiethOfSigmaOverScale) {
  const auto psi = single(GaussianPacket::make(0, 0.25, 4), 2.0);
  const PhysicalParams params{1.0, {2.0}};
  EXPECT_NEAR(default_dt(psi, params, false, 0.1), 0.25 / (50 * 2.0), 1e-15);
  EXPECT_NEAR(default_dt(psi, params, true, 0.1), 0.25 / (50 * (2.0 + 1.0 / (2.0 * 0.25))), 1e-15);
  EXPECT_EQ(default_dt(single(GaussianPacket::make(0, 0.25)), params, false, 0.1), 0.1);
}

TEST(Equivariance, NullCase) {
  std::mt19937_64 rng(31);
  const auto r = equivariance_test(GaussianPacket::make(0, 1), 1, 1, 2000, 0.0, rng);
  EXPECT_GT(r.p_value, 0.01);
}

TEST(Equivariance, WidthDoubling) {
  std::mt19937_64 rng(42);
  const double t = std::sqrt(3.0) * 2;
  const auto r = equivariance_test(GaussianPacket::make(0, 1), 1, 1, 10000, t, rng);
  EXPECT_GT(r.p_value, 0.01);
  EXPECT_NEAR(r.expected_variance, 4.0, 1e-12);
  EXPECT_LT(std::abs(r.sample_variance / r.expected_variance - 1), 0.05);
}

TEST(Equivariance, RejectsSmallN) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(equivariance_test(GaussianPacket::make(0, 1), 1, 1, 999, 1.0, rng), Error);
}
