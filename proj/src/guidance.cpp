#include "pilotwave/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "pilotwave/error.hpp"
#include "pilotwave/stats.hpp"

namespace pilotwave {

namespace {

/// Velocities of the dofs in [first, last).
Eigen::VectorXd field(const WaveFunction& psi, const Configuration& c, const PhysicalParams& params,
                      std::size_t first, std::size_t last) {
  const std::size_t nb = psi.size();
  const std::size_t nd = psi.registry().size();
  if (static_cast<std::size_t>(c.size()) != nd) {
    throw Error(ErrorKind::DomainMismatch, "configuration size differs from the dof count");
  }
  Eigen::MatrixXcd val(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nd));
  Eigen::MatrixXcd grad(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nd));
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t d = 0; d < nd; ++d) {
      const auto& p = psi.branches()[b].packets[d];
      const double x = c[static_cast<Eigen::Index>(d)];
      val(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d)) = evaluate(p, x);
      grad(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d)) = gradient(p, x);
    }
  }
  Eigen::VectorXcd v(static_cast<Eigen::Index>(nb));
  for (std::size_t b = 0; b < nb; ++b) v[static_cast<Eigen::Index>(b)] = val.row(static_cast<Eigen::Index>(b)).prod();
  const double den = (v.adjoint() * psi.gram() * v)(0).real();
  if (!(den > kDensityFloor)) {
    std::string where;
    for (Eigen::Index d = 0; d < c.size(); ++d) where += fmt::format("{}{:.6g}", d ? ", " : "", c[d]);
    throw Error(ErrorKind::NullRegion, fmt::format("density {:.3g} below floor at ({})", den, where));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(last - first));
  Eigen::VectorXcd w(static_cast<Eigen::Index>(nb));
  for (std::size_t d = first; d < last; ++d) {
    for (std::size_t b = 0; b < nb; ++b) {
      const auto bi = static_cast<Eigen::Index>(b);
      Complex prod = grad(bi, static_cast<Eigen::Index>(d));
      for (std::size_t e = 0; e < nd; ++e) {
        if (e != d) prod *= val(bi, static_cast<Eigen::Index>(e));
      }
      w[bi] = prod;
    }
    const double num = (v.adjoint() * psi.gram() * w)(0).imag();
    out[static_cast<Eigen::Index>(d - first)] = params.hbar / params.mass(d) * num / den;
  }
  return out;
}

}  // namespace

double velocity(const WaveFunction& psi, const Configuration& c, std::size_t dof, const PhysicalParams& params) {
  if (dof >= psi.registry().size()) throw Error(ErrorKind::DomainMismatch, "dof index out of range");
  return field(psi, c, params, dof, dof + 1)[0];
}

Eigen::VectorXd velocities(const WaveFunction& psi, const Configuration& c, const PhysicalParams& params) {
  return field(psi, c, params, 0, psi.registry().size());
}

// ---------------------------------------------------------------------------

WaveProvider WaveProvider::frozen(WaveFunction psi) {
  WaveProvider p;
  p.mode_ = Mode::Frozen;
  p.psi_ = std::move(psi);
  return p;
}

WaveProvider WaveProvider::free(WaveFunction psi, double hbar) {
  WaveProvider p;
  p.mode_ = Mode::Free;
  p.psi_ = std::move(psi);
  p.hbar_ = hbar;
  return p;
}

WaveProvider WaveProvider::custom(std::function<WaveFunction(double)> fn) {
  WaveProvider p;
  p.mode_ = Mode::Custom;
  p.fn_ = std::move(fn);
  return p;
}

WaveFunction WaveProvider::at(double t) const {
  switch (mode_) {
    case Mode::Frozen: return psi_;
    case Mode::Free: return free_evolve(psi_, hbar_, t);
    case Mode::Custom: return fn_(t);
  }
  return psi_;
}

Configuration step(const WaveFunction& psi, const Configuration& c, double dt, const PhysicalParams& params) {
  if (!(dt > 0)) throw Error(ErrorKind::InvalidArgument, "step needs dt > 0");
  const Eigen::VectorXd k1 = velocities(psi, c, params);
  const Eigen::VectorXd k2 = velocities(psi, c + 0.5 * dt * k1, params);
  const Eigen::VectorXd k3 = velocities(psi, c + 0.5 * dt * k2, params);
  const Eigen::VectorXd k4 = velocities(psi, c + dt * k3, params);
  return c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Configuration step(const WaveProvider& provider, double t, const Configuration& c, double dt,
                   const PhysicalParams& params) {
  if (const auto* psi = provider.static_wavefunction()) return step(*psi, c, dt, params);
  if (!(dt > 0)) throw Error(ErrorKind::InvalidArgument, "step needs dt > 0");
  const WaveFunction start = provider.at(t);
  const WaveFunction mid = provider.at(t + 0.5 * dt);
  const WaveFunction end = provider.at(t + dt);
  const Eigen::VectorXd k1 = velocities(start, c, params);
  const Eigen::VectorXd k2 = velocities(mid, c + 0.5 * dt * k1, params);
  const Eigen::VectorXd k3 = velocities(mid, c + 0.5 * dt * k2, params);
  const Eigen::VectorXd k4 = velocities(end, c + dt * k3, params);
  return c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::string effective_label(const WaveFunction& psi, const Configuration& c, double n_sigma) {
  const auto idx = supporting_branches(psi, c, n_sigma);
  std::string out;
  for (auto i : idx) {
    if (!out.empty()) out += '|';
    out += psi.branches()[i].label;
  }
  return out;
}

Trajectory evolve_trajectory(const WaveProvider& provider, const Configuration& c0, double t0, double t1, double dt,
                             const PhysicalParams& params, double n_sigma) {
  if (!(t1 > t0)) throw Error(ErrorKind::InvalidArgument, "evolve_trajectory needs t1 > t0");
  if (!(dt > 0)) throw Error(ErrorKind::InvalidArgument, "evolve_trajectory needs dt > 0");
  Trajectory traj;
  auto record = [&](double t, const Configuration& c) {
    const WaveFunction psi = provider.at(t);
    std::string label = effective_label(psi, c, n_sigma);
    if (label.empty() && psi.size() > 0) {
      // supporting_branches found nothing: report with diagnostics.
      try {
        effective_branches(psi, c, n_sigma);
      } catch (const Error& e) {
        throw Error(ErrorKind::NullRegion, fmt::format("at t = {:.6g}: {}", t, e.what()));
      }
    }
    traj.times.push_back(t);
    traj.states.push_back(c);
    traj.branch_ids.push_back(std::move(label));
  };
  record(t0, c0);
  Configuration c = c0;
  const auto n_steps = static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-9));
  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = t0 + static_cast<double>(i) * dt;
    const double h = std::min(dt, t1 - t);
    try {
      c = step(provider, t, c, h, params);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NullRegion) throw;
      throw Error(ErrorKind::NullRegion, fmt::format("integrating from t = {:.6g}: {}", t, e.what()));
    }
    record(i + 1 == n_steps ? t1 : t + h, c);
  }
  return traj;
}

double default_dt(const WaveFunction& psi, const PhysicalParams& params, bool spreading, double fallback) {
  double dt = std::numeric_limits<double>::infinity();
  for (const auto& b : psi.branches()) {
    for (std::size_t d = 0; d < b.packets.size(); ++d) {
      const auto& p = b.packets[d];
      const double rate = params.hbar / params.mass(d);
      double scale = std::abs(rate * p.wavenumber);
      if (spreading) scale += rate / p.sigma;
      if (scale > 0) dt = std::min(dt, p.current_sigma() / (50.0 * scale));
    }
  }
  return std::isfinite(dt) ? dt : fallback;
}

EquivarianceReport equivariance_test(const GaussianPacket& p0, double hbar, double mass, std::size_t n, double t,
                                     std::mt19937_64& rng, std::optional<double> dt) {
  if (n < 1000) throw Error(ErrorKind::InvalidArgument, "equivariance test needs N >= 1000");
  if (t < 0) throw Error(ErrorKind::InvalidArgument, "equivariance test needs t >= 0");
  const DofRegistry registry({Dof{"x", DofRole::Particle, mass}});
  const WaveFunction psi0(registry, {Branch{1.0, InternalState::basis({{1, SpinLabel::A}}), {p0}, "psi"}});
  const auto provider = WaveProvider::free(psi0, hbar);
  const PhysicalParams params = registry.physical_params(hbar);
  const double h = dt.value_or(default_dt(psi0, params, true, 0.01));
  const double t0 = p0.time();
  const double t_end = t0 + t;

  std::normal_distribution<double> normal(p0.current_center(), p0.current_sigma());
  EquivarianceReport report;
  report.n = n;
  report.t = t;
  report.final_positions.reserve(n);
  const auto n_steps = static_cast<std::size_t>(std::ceil(t / h - 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    Configuration c(1);
    c[0] = normal(rng);
    for (std::size_t s = 0; s < n_steps; ++s) {
      const double ts = t0 + static_cast<double>(s) * h;
      c = step(provider, ts, c, std::min(h, t_end - ts), params);
    }
    report.final_positions.push_back(c[0]);
  }

  const GaussianPacket pt = free_evolve(p0, hbar, mass, t_end);
  report.expected_mean = pt.current_center();
  report.expected_variance = pt.current_sigma() * pt.current_sigma();
  double mean = 0;
  for (double x : report.final_positions) mean += x;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double x : report.final_positions) var += (x - mean) * (x - mean);
  report.sample_mean = mean;
  report.sample_variance = var / static_cast<double>(n - 1);
  const double mu = pt.current_center();
  const double sd = pt.current_sigma();
  const auto ks = stats::ks_test(report.final_positions, [&](double x) { return stats::normal_cdf((x - mu) / sd); });
  report.ks_statistic = ks.statistic;
  report.p_value = ks.p_value;
  return report;
}

}  // namespace pilotwave
