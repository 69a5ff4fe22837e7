#pragma once

// Measurement devices as linear maps on branches.
//
// A device never moves particles continuously; it rewrites the packets and
// internal factors of each branch (extended to superpositions by linearity)
// and the dofs it touches are then re-placed by quantile transport from the
// pre-event configuration (see resolve_positions_after_event).

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pilotwave/wavefunction.hpp"

namespace pilotwave {

struct BranchRewrite {
  std::string name;
  std::vector<std::size_t> dofs;  ///< dofs whose packets the device rewrites
  std::vector<int> slots;         ///< internal slots the device reads
  std::size_t primary_dof = 0;    ///< dof whose final position records the outcome
  std::function<std::vector<Branch>(const Branch&)> rule;
};

struct OutcomePacket {
  GaussianPacket packet;
  std::string label;
};

struct OutcomeLabel {
  std::string device;
  std::string label;

  bool operator==(const OutcomeLabel&) const = default;
};

BranchRewrite identity_rewrite();

/// chi_A psi_0 -> chi_A out_a and chi_B psi_0 -> chi_B out_b on `slot`.
/// When `ready` is given, branches whose dof packet has another shape are rejected.
BranchRewrite stern_gerlach(std::string name, int slot, std::size_t dof, const GaussianPacket& out_a,
                            const GaussianPacket& out_b, std::optional<GaussianPacket> ready = std::nullopt,
                            double n_sigma = 5.0);

struct BellometerSetup {
  std::string name = "bell";
  std::pair<int, int> slots{1, 3};
  std::size_t dof_i = 0;
  std::size_t dof_j = 2;
  std::size_t pointer = 4;
  GaussianPacket ready;
  std::array<GaussianPacket, 4> outputs;  ///< indexed by BellKind
  GaussianPacket dustbin_i;
  GaussianPacket dustbin_j;
  double n_sigma = 5.0;
};

/// Bell_m(i,j) phi_i phi_j psi_0 -> Bell_m(i,j) phi'_i phi'_j psi_m for each kind m.
BranchRewrite bellometer(const BellometerSetup& setup);

/// Inverse of the bellometer's pointer coupling: Bell_m(i,j) psi_m -> Bell_m(i,j) psi_0.
BranchRewrite recombine_pointer(std::string name, std::size_t pointer, const std::array<GaussianPacket, 4>& inputs,
                                const GaussianPacket& ready, std::pair<int, int> slots, double n_sigma = 5.0);

/// Linear extension over the branch list. Branches with identical packets
/// are merged by adding amplitude x internal; the result is in canonical
/// order and its norm is checked against the input's.
WaveFunction apply(const BranchRewrite& rewrite, const WaveFunction& psi);

/// Splits a non-zero vector into (amplitude, normalized state) with the
/// first significant entry of the state real and positive.
std::pair<Complex, InternalState> canonical_split(const InternalState& v);

/// Label of the unique outcome packet whose support contains c[dof].
OutcomeLabel readout(const std::string& device, const Configuration& c, std::size_t dof,
                     std::span<const OutcomePacket> outcomes, double n_sigma = 5.0);

/// Unmoved dofs keep their positions. For each moved dof the pre-event
/// conditional quantile is computed; the primary dof's quantile selects the
/// post-event branch by cumulative conditional weight (branches ordered by
/// their primary packet centre) and every moved dof is placed at the
/// matching quantile of that branch's truncated packet. Deterministic in
/// c_pre and Born-distributed when c_pre is.
Configuration resolve_positions_after_event(const WaveFunction& pre, const WaveFunction& post,
                                            const Configuration& c_pre, const BranchRewrite& rewrite,
                                            double n_sigma = 5.0);

}  // namespace pilotwave
