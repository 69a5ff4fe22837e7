#pragma once

// Guidance equation with internal degrees of freedom and its fixed-step
// RK4 integrator.
//
// For dof d at configuration c the velocity is
//   (hbar/m_d) Im( sum_ij G_ij conj(P_i(c)) dP_j/dx_d(c) ) / |Psi(c)|^2
// where P_b is the packet product of branch b and G the branch Gram matrix
// (amplitudes and internal inner products), so orthogonal internal states
// drop out of both numerator and denominator.

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pilotwave/wavefunction.hpp"

namespace pilotwave {

inline constexpr double kDensityFloor = 1e-30;

double velocity(const WaveFunction& psi, const Configuration& c, std::size_t dof, const PhysicalParams& params);

/// Velocities of every dof at once.
Eigen::VectorXd velocities(const WaveFunction& psi, const Configuration& c, const PhysicalParams& params);

/// Time-dependent wavefunction Psi(t) driving the trajectories.
class WaveProvider {
 public:
  /// Packets held fixed.
  static WaveProvider frozen(WaveFunction psi);
  /// Every packet evolves freely from its own birth time.
  static WaveProvider free(WaveFunction psi, double hbar);
  static WaveProvider custom(std::function<WaveFunction(double)> fn);

  WaveFunction at(double t) const;
  /// Non-null when the provider does not depend on time.
  const WaveFunction* static_wavefunction() const { return mode_ == Mode::Frozen ? &psi_ : nullptr; }

 private:
  enum class Mode { Frozen, Free, Custom };
  Mode mode_ = Mode::Frozen;
  WaveFunction psi_;
  double hbar_ = 1.0;
  std::function<WaveFunction(double)> fn_;
};

/// Classical RK4 step of dx/dt = V[Psi(t)](x) over all dofs.
Configuration step(const WaveProvider& provider, double t, const Configuration& c, double dt,
                   const PhysicalParams& params);
Configuration step(const WaveFunction& psi, const Configuration& c, double dt, const PhysicalParams& params);

struct Trajectory {
  std::vector<double> times;
  std::vector<Configuration> states;
  std::vector<std::string> branch_ids;  ///< effective branch label(s) per time
};

/// Fixed-step RK4 from t0 to t1 (the last step is shortened to land on t1),
/// asserting each state lies in some branch support.
Trajectory evolve_trajectory(const WaveProvider& provider, const Configuration& c0, double t0, double t1, double dt,
                             const PhysicalParams& params, double n_sigma = 5.0);

/// Labels of the supporting branches joined with '|'.
std::string effective_label(const WaveFunction& psi, const Configuration& c, double n_sigma = 5.0);

/// Step size sigma / (50 * velocity scale) over every packet, where the
/// scale is |hbar k / m| plus hbar/(m sigma) when packets spread.
double default_dt(const WaveFunction& psi, const PhysicalParams& params, bool spreading, double fallback);

struct EquivarianceReport {
  std::size_t n = 0;
  double t = 0;
  double ks_statistic = 0;
  double p_value = 0;
  double sample_mean = 0;
  double sample_variance = 0;
  double expected_mean = 0;
  double expected_variance = 0;
  std::vector<double> final_positions;
};

/// Samples N positions from |p0|^2, integrates each through the freely
/// spreading packet up to time t and compares against |psi(x, t)|^2.
EquivarianceReport equivariance_test(const GaussianPacket& p0, double hbar, double mass, std::size_t n, double t,
                                     std::mt19937_64& rng, std::optional<double> dt = std::nullopt);

}  // namespace pilotwave
