#pragma once

#include <complex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "pilotwave/spin.hpp"
#include "pilotwave/wavepacket.hpp"

namespace pilotwave {

enum class DofRole { Particle, Pointer };

struct Dof {
  std::string id;
  DofRole role = DofRole::Particle;
  double mass = 1.0;

  bool operator==(const Dof&) const = default;
};

class DofRegistry {
 public:
  DofRegistry() = default;
  explicit DofRegistry(std::vector<Dof> dofs);

  std::size_t size() const noexcept { return dofs_.size(); }
  const Dof& operator[](std::size_t i) const { return dofs_.at(i); }
  const std::vector<Dof>& dofs() const noexcept { return dofs_; }
  std::size_t index_of(std::string_view id) const;
  PhysicalParams physical_params(double hbar = 1.0) const;

  bool operator==(const DofRegistry&) const = default;

 private:
  std::vector<Dof> dofs_;
};

/// One position per degree of freedom, indexed like the registry.
using Configuration = Eigen::VectorXd;

struct Branch {
  Complex amplitude{1.0};
  InternalState internal;               ///< normalized
  std::vector<GaussianPacket> packets;  ///< one per registered dof
  std::string label;                    ///< outcome path, e.g. "psi/bell:alpha/sg2:a"
};

/// Finite sum of branches amplitude x internal x packet product.
class WaveFunction {
 public:
  WaveFunction() = default;
  WaveFunction(DofRegistry registry, std::vector<Branch> branches, bool effective = false);

  const DofRegistry& registry() const noexcept { return registry_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  std::size_t size() const noexcept { return branches_.size(); }
  bool is_effective() const noexcept { return effective_; }

  /// G(i, j) = conj(a_i) a_j <internal_i, internal_j>.
  const Eigen::MatrixXcd& gram() const noexcept { return gram_; }

  /// <Psi|Psi> including spatial overlaps.
  double norm_squared() const;

  /// Values prod_d packet_{b,d}(c_d) for every branch b.
  Eigen::VectorXcd branch_values(const Configuration& c) const;

 private:
  DofRegistry registry_;
  std::vector<Branch> branches_;
  bool effective_ = false;
  Eigen::MatrixXcd gram_;
};

/// |Psi(c)|^2 summed over internal components.
double born_density(const WaveFunction& psi, const Configuration& c);

/// Branches are orthogonal when their internal states are orthogonal or some
/// dof carries disjoint packets.
bool branches_orthogonal(const WaveFunction& psi, double n_sigma = 5.0);

/// Distribution-postulate draw. Per-dof positions come from the branch's
/// Gaussians truncated to their n_sigma supports.
Configuration sample_configuration(const WaveFunction& psi, std::mt19937_64& rng, double n_sigma = 5.0);

/// Indices of branches whose every packet support contains c.
std::vector<std::size_t> supporting_branches(const WaveFunction& psi, const Configuration& c,
                                             double n_sigma = 5.0);

/// Renormalized sub-wavefunction of the supporting branches.
WaveFunction effective_branches(const WaveFunction& psi, const Configuration& c, double n_sigma = 5.0);

WaveFunction renormalize(const WaveFunction& psi);

/// Every packet advanced to absolute time t under free evolution.
WaveFunction free_evolve(const WaveFunction& psi, double hbar, double t);

/// Internal-space density matrix after tracing all spatial dofs.
DensityMatrix internal_density(const WaveFunction& psi);

/// Same parameters, branch by branch, to within tol.
bool approx_equal(const WaveFunction& a, const WaveFunction& b, double tol = 1e-12);

nlohmann::json to_json(const GaussianPacket& p);
GaussianPacket packet_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WaveFunction& psi);
WaveFunction wavefunction_from_json(const nlohmann::json& j);

}  // namespace pilotwave
