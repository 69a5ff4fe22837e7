#pragma once

// Exact linear algebra for multi-slot two-level internal states.
//
// A state lives on an ordered set of slots (1-based, as in the usual
// a1 b2 b3 a4 notation). Amplitudes are stored densely in the
// lexicographic product basis with slot order ascending and A < B, so
// index bit (k-1-p) holds the label of the p-th slot.

#include <array>
#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pilotwave {

using Complex = std::complex<double>;

enum class SpinLabel { A = 0, B = 1 };

enum class BellKind { Alpha = 0, Beta = 1, Gamma = 2, Delta = 3 };

inline constexpr std::array<BellKind, 4> kBellKinds = {BellKind::Alpha, BellKind::Beta,
                                                       BellKind::Gamma, BellKind::Delta};

char to_char(SpinLabel label);
std::string_view to_string(BellKind kind);
BellKind bell_kind_from_string(std::string_view name);

struct ProductTerm {
  std::vector<SpinLabel> labels;
  Complex amplitude;
};

class InternalState {
 public:
  InternalState() = default;
  /// `slots` must be strictly increasing and positive; `amplitudes` has
  /// size 2^slots.size().
  InternalState(std::vector<int> slots, Eigen::VectorXcd amplitudes);

  /// Single product ket, e.g. {{1, A}, {2, B}} for a1 b2. Slots may be given
  /// in any order.
  static InternalState basis(std::vector<std::pair<int, SpinLabel>> kets);

  const std::vector<int>& slots() const noexcept { return slots_; }
  int n_slots() const noexcept { return static_cast<int>(slots_.size()); }
  const Eigen::VectorXcd& amplitudes() const noexcept { return amplitudes_; }

  /// Non-zero terms (|amp| > tol) in canonical lexicographic order.
  std::vector<ProductTerm> terms(double tol = 0.0) const;

  Complex amplitude(std::span<const SpinLabel> labels) const;
  double norm_squared() const { return amplitudes_.squaredNorm(); }
  bool is_normalized(double tol = 1e-12) const { return std::abs(norm_squared() - 1.0) <= tol; }
  bool approx_equal(const InternalState& other, double tol = 1e-12) const;

  /// Position of `slot` within slots(), or -1.
  int slot_position(int slot) const;

  friend InternalState operator*(Complex c, const InternalState& s);
  friend InternalState operator+(const InternalState& x, const InternalState& y);
  friend InternalState operator-(const InternalState& x, const InternalState& y);

 private:
  std::vector<int> slots_;
  Eigen::VectorXcd amplitudes_;
};

/// Two-slot Bell state on slots i, j; n bounds the admissible slot range.
InternalState bell_state(BellKind kind, int i, int j, int n = 4);

InternalState tensor(const InternalState& a, const InternalState& b);
InternalState tensor(std::span<const InternalState> states);

/// Conjugate-linear in `s1`.
Complex inner_product(const InternalState& s1, const InternalState& s2);

/// Contracts `bra` (on a subset of the slots of `state`) against `state`,
/// leaving a state on the remaining slots: (<bra| x 1)|state>.
InternalState partial_inner(const InternalState& bra, const InternalState& state);

/// Component of `state` with `slot` fixed to `label`, still on all slots.
InternalState project_slot(const InternalState& state, int slot, SpinLabel label);

/// Component of `state` along Bell_kind(i, j), still on all slots.
InternalState project_bell_pair(const InternalState& state, BellKind kind, int i, int j);

/// Coefficients c(m, n) with state = sum c(m, n) Bell_m(pair1) Bell_n(pair2).
Eigen::Matrix4cd bell_decompose(const InternalState& state, std::pair<int, int> pair1,
                                std::pair<int, int> pair2);
InternalState bell_recompose(const Eigen::Matrix4cd& coefficients, std::pair<int, int> pair1,
                             std::pair<int, int> pair2);

class DensityMatrix {
 public:
  DensityMatrix(std::vector<int> slots, Eigen::MatrixXcd entries);

  const std::vector<int>& slots() const noexcept { return slots_; }
  int n_slots() const noexcept { return static_cast<int>(slots_.size()); }
  const Eigen::MatrixXcd& entries() const noexcept { return entries_; }

  Eigen::VectorXd eigenvalues() const;
  bool is_valid(double tol = 1e-12, double psd_tol = 1e-10) const;

 private:
  std::vector<int> slots_;
  Eigen::MatrixXcd entries_;
};

DensityMatrix pure_density(const InternalState& state);
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep);
DensityMatrix reduced_density(const InternalState& state, std::span<const int> keep);
/// A mixture may keep every slot, giving the mixture's own density matrix.
DensityMatrix reduced_density(std::span<const std::pair<double, InternalState>> mixture,
                              std::span<const int> keep);

/// Schmidt rank across the bipartition exceeds one (singular values below
/// 1e-10 count as zero).
bool is_entangled(const InternalState& state, std::span<const int> part_a,
                  std::span<const int> part_b);
int schmidt_rank(const InternalState& state, std::span<const int> part_a,
                 std::span<const int> part_b);

/// Negative partial transpose on `part_b`. Exact for 2x2 and 2x3 splits,
/// sufficient-only beyond that.
bool is_entangled(const DensityMatrix& rho, std::span<const int> part_a,
                  std::span<const int> part_b);

/// Whether slots i and j are entangled with each other in the reduced
/// state obtained by tracing every other slot.
bool pair_entangled(const InternalState& state, int i, int j);

/// Renders in the factorized label notation, e.g.
/// `0.5(a1 b2 + b1 a2)(a3 b4 + b3 a4)`.
std::string render(const InternalState& state);

}  // namespace pilotwave
