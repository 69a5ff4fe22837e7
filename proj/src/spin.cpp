#include "pilotwave/spin.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "pilotwave/error.hpp"

namespace pilotwave {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kRankTol = 1e-10;

std::size_t dim(std::size_t k) { return std::size_t{1} << k; }

int bit(std::size_t index, std::size_t pos, std::size_t k) {
  return static_cast<int>((index >> (k - 1 - pos)) & 1U);
}

/// Positions of `subset` inside the sorted `slots`; throws if a slot is absent.
std::vector<std::size_t> positions_of(const std::vector<int>& slots, std::span<const int> subset) {
  std::vector<std::size_t> out;
  out.reserve(subset.size());
  for (int s : subset) {
    auto it = std::find(slots.begin(), slots.end(), s);
    if (it == slots.end()) {
      throw Error(ErrorKind::InvalidSlot, fmt::format("slot {} not present in state", s));
    }
    out.push_back(static_cast<std::size_t>(it - slots.begin()));
  }
  return out;
}

/// Full index obtained by scattering `sub_index` bits (over `positions`, in
/// order) into a k-bit index, OR-ed into `base`.
std::size_t scatter(std::size_t base, std::size_t sub_index, const std::vector<std::size_t>& positions,
                    std::size_t k) {
  const std::size_t m = positions.size();
  for (std::size_t p = 0; p < m; ++p) {
    if ((sub_index >> (m - 1 - p)) & 1U) base |= std::size_t{1} << (k - 1 - positions[p]);
  }
  return base;
}

std::vector<int> sorted_unique(std::span<const int> slots, ErrorKind on_duplicate) {
  std::vector<int> out(slots.begin(), slots.end());
  std::sort(out.begin(), out.end());
  if (std::adjacent_find(out.begin(), out.end()) != out.end()) {
    throw Error(on_duplicate, "duplicate slot in slot list");
  }
  return out;
}

std::vector<int> complement(const std::vector<int>& slots, const std::vector<int>& subset) {
  std::vector<int> out;
  std::set_difference(slots.begin(), slots.end(), subset.begin(), subset.end(),
                      std::back_inserter(out));
  return out;
}

/// Reshapes a state into a (part_a x rest) coefficient matrix.
Eigen::MatrixXcd reshape(const InternalState& state, const std::vector<int>& part_a,
                         const std::vector<int>& part_b) {
  const auto k = static_cast<std::size_t>(state.n_slots());
  const auto pa = positions_of(state.slots(), part_a);
  const auto pb = positions_of(state.slots(), part_b);
  Eigen::MatrixXcd m(dim(pa.size()), dim(pb.size()));
  for (std::size_t ia = 0; ia < dim(pa.size()); ++ia) {
    for (std::size_t ib = 0; ib < dim(pb.size()); ++ib) {
      m(ia, ib) = state.amplitudes()[scatter(scatter(0, ia, pa, k), ib, pb, k)];
    }
  }
  return m;
}

void check_bipartition(const std::vector<int>& slots, std::span<const int> part_a,
                       std::span<const int> part_b, std::vector<int>& a, std::vector<int>& b) {
  a = sorted_unique(part_a, ErrorKind::BadPartition);
  b = sorted_unique(part_b, ErrorKind::BadPartition);
  if (a.empty() || b.empty()) throw Error(ErrorKind::BadPartition, "empty side of bipartition");
  std::vector<int> all;
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(all));
  if (all != slots) {
    throw Error(ErrorKind::BadPartition, "bipartition does not partition the state's slots");
  }
}

std::string format_real(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{:.12g}", v);
}

std::string format_coefficient(Complex c) {
  const double re = std::abs(c.real()) < 1e-12 ? 0.0 : c.real();
  const double im = std::abs(c.imag()) < 1e-12 ? 0.0 : c.imag();
  if (im == 0.0) return format_real(re);
  if (re == 0.0) return format_real(im) + "i";
  return fmt::format("({}{}{}i)", format_real(re), im < 0 ? "-" : "+", format_real(std::abs(im)));
}

bool near(Complex c, Complex target) { return std::abs(c - target) < 1e-12; }

Complex leading_entry(const Eigen::VectorXcd& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-9 * scale) return v[i];
  }
  return Complex{0.0};
}

std::string render_factor(const InternalState& factor) {
  const auto terms = factor.terms(1e-12);
  std::string out;
  bool first = true;
  for (const auto& term : terms) {
    std::string ket;
    for (std::size_t p = 0; p < term.labels.size(); ++p) {
      if (p) ket += ' ';
      ket += to_char(term.labels[p]);
      ket += std::to_string(factor.slots()[p]);
    }
    Complex c = term.amplitude;
    if (!first) {
      const bool negative_real = std::abs(c.imag()) < 1e-12 && c.real() < 0;
      out += negative_real ? " - " : " + ";
      if (negative_real) c = -c;
    } else if (near(c, -1.0)) {
      out += "-";
      c = 1.0;
    }
    if (!near(c, 1.0)) out += format_coefficient(c) + " ";
    out += ket;
    first = false;
  }
  if (terms.size() > 1) out = "(" + out + ")";
  return out;
}

/// Finest split into product factors, each a state on its own slot subset.
void factorize(const InternalState& state, std::vector<InternalState>& factors) {
  const auto k = static_cast<std::size_t>(state.n_slots());
  if (k <= 1) {
    factors.push_back(state);
    return;
  }
  std::vector<unsigned> masks;
  for (unsigned mask = 1; mask < (1U << k) - 1; ++mask) {
    if (mask & 1U) masks.push_back(mask);
  }
  std::stable_sort(masks.begin(), masks.end(),
                   [](unsigned x, unsigned y) { return std::popcount(x) < std::popcount(y); });
  for (unsigned mask : masks) {
    std::vector<int> a, b;
    for (std::size_t p = 0; p < k; ++p) {
      (mask >> p & 1U ? a : b).push_back(state.slots()[p]);
    }
    const Eigen::MatrixXcd m = reshape(state, a, b);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv.size() > 1 && sv[1] > kRankTol * std::max(1.0, sv[0])) continue;
    factors.emplace_back(a, Eigen::VectorXcd(svd.matrixU().col(0)));
    factorize(InternalState(b, Eigen::VectorXcd(sv[0] * svd.matrixV().col(0).conjugate())), factors);
    return;
  }
  factors.push_back(state);
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSlot: return "invalid-slot";
    case ErrorKind::OverlappingSlots: return "overlapping-slots";
    case ErrorKind::SlotCountMismatch: return "slot-count-mismatch";
    case ErrorKind::NotFourSlot: return "state-not-4-slot";
    case ErrorKind::EmptyKeep: return "empty-keep";
    case ErrorKind::KeepAll: return "keep-all";
    case ErrorKind::BadPartition: return "bad-partition";
    case ErrorKind::BadMixture: return "bad-mixture";
    case ErrorKind::ZeroNorm: return "zero-norm";
    case ErrorKind::NonOrthogonalBranches: return "non-orthogonal-branches";
    case ErrorKind::NoSupportingBranch: return "no-supporting-branch";
    case ErrorKind::NullRegion: return "null-region";
    case ErrorKind::NonDisjointOutputs: return "non-disjoint-outputs";
    case ErrorKind::PointerNotReady: return "pointer-not-ready";
    case ErrorKind::PacketNotReady: return "packet-not-ready";
    case ErrorKind::StructureMismatch: return "structure-mismatch";
    case ErrorKind::DomainMismatch: return "domain-mismatch";
    case ErrorKind::AmbiguousReadout: return "ambiguous-readout";
    case ErrorKind::ZeroConditionalDensity: return "zero-conditional-density";
    case ErrorKind::NonUnitary: return "non-unitary";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Parse: return "parse-error";
  }
  return "unknown";
}

char to_char(SpinLabel label) { return label == SpinLabel::A ? 'a' : 'b'; }

std::string_view to_string(BellKind kind) {
  switch (kind) {
    case BellKind::Alpha: return "alpha";
    case BellKind::Beta: return "beta";
    case BellKind::Gamma: return "gamma";
    case BellKind::Delta: return "delta";
  }
  return "?";
}

BellKind bell_kind_from_string(std::string_view name) {
  for (BellKind k : kBellKinds) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::InvalidArgument, fmt::format("unknown Bell kind '{}'", name));
}

// ---------------------------------------------------------------------------

InternalState::InternalState(std::vector<int> slots, Eigen::VectorXcd amplitudes)
    : slots_(std::move(slots)), amplitudes_(std::move(amplitudes)) {
  for (std::size_t p = 0; p < slots_.size(); ++p) {
    if (slots_[p] < 1) throw Error(ErrorKind::InvalidSlot, "slots are 1-based");
    if (p > 0 && slots_[p] <= slots_[p - 1]) {
      throw Error(ErrorKind::OverlappingSlots, "slots must be strictly increasing");
    }
  }
  if (static_cast<std::size_t>(amplitudes_.size()) != dim(slots_.size())) {
    throw Error(ErrorKind::SlotCountMismatch, "amplitude vector size must be 2^n_slots");
  }
}

InternalState InternalState::basis(std::vector<std::pair<int, SpinLabel>> kets) {
  std::sort(kets.begin(), kets.end());
  std::vector<int> slots;
  std::size_t index = 0;
  for (const auto& [slot, label] : kets) {
    slots.push_back(slot);
    index = (index << 1) | static_cast<std::size_t>(label);
  }
  Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim(kets.size())));
  amps[static_cast<Eigen::Index>(index)] = 1.0;
  return InternalState(std::move(slots), std::move(amps));
}

std::vector<ProductTerm> InternalState::terms(double tol) const {
  std::vector<ProductTerm> out;
  const auto k = slots_.size();
  for (Eigen::Index i = 0; i < amplitudes_.size(); ++i) {
    if (std::abs(amplitudes_[i]) <= tol || amplitudes_[i] == Complex{0.0}) continue;
    ProductTerm term;
    term.amplitude = amplitudes_[i];
    for (std::size_t p = 0; p < k; ++p) {
      term.labels.push_back(static_cast<SpinLabel>(bit(static_cast<std::size_t>(i), p, k)));
    }
    out.push_back(std::move(term));
  }
  return out;
}

Complex InternalState::amplitude(std::span<const SpinLabel> labels) const {
  if (labels.size() != slots_.size()) {
    throw Error(ErrorKind::SlotCountMismatch, "label tuple length differs from slot count");
  }
  std::size_t index = 0;
  for (SpinLabel l : labels) index = (index << 1) | static_cast<std::size_t>(l);
  return amplitudes_[static_cast<Eigen::Index>(index)];
}

bool InternalState::approx_equal(const InternalState& other, double tol) const {
  return slots_ == other.slots_ && (amplitudes_ - other.amplitudes_).cwiseAbs().maxCoeff() <= tol;
}

int InternalState::slot_position(int slot) const {
  auto it = std::find(slots_.begin(), slots_.end(), slot);
  return it == slots_.end() ? -1 : static_cast<int>(it - slots_.begin());
}

InternalState operator*(Complex c, const InternalState& s) {
  return InternalState(s.slots_, c * s.amplitudes_);
}

InternalState operator+(const InternalState& x, const InternalState& y) {
  if (x.slots_ != y.slots_) throw Error(ErrorKind::SlotCountMismatch, "sum of states on different slots");
  return InternalState(x.slots_, x.amplitudes_ + y.amplitudes_);
}

InternalState operator-(const InternalState& x, const InternalState& y) {
  return x + Complex{-1.0} * y;
}

// ---------------------------------------------------------------------------

InternalState bell_state(BellKind kind, int i, int j, int n) {
  if (i == j || i < 1 || j < 1 || i > n || j > n) {
    throw Error(ErrorKind::InvalidSlot, fmt::format("Bell state on slots ({}, {}) with n = {}", i, j, n));
  }
  // Amplitudes indexed by (label at i, label at j).
  Complex aa = 0, ab = 0, ba = 0, bb = 0;
  switch (kind) {
    case BellKind::Alpha: ab = kInvSqrt2; ba = kInvSqrt2; break;
    case BellKind::Beta: ab = kInvSqrt2; ba = -kInvSqrt2; break;
    case BellKind::Gamma: aa = kInvSqrt2; bb = kInvSqrt2; break;
    case BellKind::Delta: aa = kInvSqrt2; bb = -kInvSqrt2; break;
  }
  Eigen::VectorXcd amps(4);
  if (i < j) {
    amps << aa, ab, ba, bb;
  } else {
    amps << aa, ba, ab, bb;
  }
  return InternalState({std::min(i, j), std::max(i, j)}, amps);
}

InternalState tensor(const InternalState& a, const InternalState& b) {
  std::vector<int> slots;
  std::merge(a.slots().begin(), a.slots().end(), b.slots().begin(), b.slots().end(),
             std::back_inserter(slots));
  if (std::adjacent_find(slots.begin(), slots.end()) != slots.end()) {
    throw Error(ErrorKind::OverlappingSlots, "tensor factors share a slot");
  }
  const auto k = slots.size();
  const auto pa = positions_of(slots, a.slots());
  const auto pb = positions_of(slots, b.slots());
  Eigen::VectorXcd amps(static_cast<Eigen::Index>(dim(k)));
  for (std::size_t ia = 0; ia < dim(pa.size()); ++ia) {
    for (std::size_t ib = 0; ib < dim(pb.size()); ++ib) {
      amps[static_cast<Eigen::Index>(scatter(scatter(0, ia, pa, k), ib, pb, k))] =
          a.amplitudes()[static_cast<Eigen::Index>(ia)] * b.amplitudes()[static_cast<Eigen::Index>(ib)];
    }
  }
  return InternalState(std::move(slots), std::move(amps));
}

InternalState tensor(std::span<const InternalState> states) {
  if (states.empty()) throw Error(ErrorKind::InvalidArgument, "tensor of an empty list");
  InternalState out = states.front();
  for (std::size_t i = 1; i < states.size(); ++i) out = tensor(out, states[i]);
  return out;
}

Complex inner_product(const InternalState& s1, const InternalState& s2) {
  if (s1.slots() != s2.slots()) {
    throw Error(ErrorKind::SlotCountMismatch, "inner product of states on different slots");
  }
  return s1.amplitudes().dot(s2.amplitudes());
}

InternalState partial_inner(const InternalState& bra, const InternalState& state) {
  const auto k = static_cast<std::size_t>(state.n_slots());
  const auto pb = positions_of(state.slots(), bra.slots());
  const auto rest = complement(state.slots(), bra.slots());
  const auto pr = positions_of(state.slots(), rest);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim(rest.size())));
  for (std::size_t ir = 0; ir < dim(rest.size()); ++ir) {
    Complex acc = 0;
    for (std::size_t ib = 0; ib < dim(pb.size()); ++ib) {
      acc += std::conj(bra.amplitudes()[static_cast<Eigen::Index>(ib)]) *
             state.amplitudes()[static_cast<Eigen::Index>(scatter(scatter(0, ib, pb, k), ir, pr, k))];
    }
    out[static_cast<Eigen::Index>(ir)] = acc;
  }
  return InternalState(rest, std::move(out));
}

InternalState project_slot(const InternalState& state, int slot, SpinLabel label) {
  const auto ket = InternalState::basis({{slot, label}});
  return tensor(ket, partial_inner(ket, state));
}

InternalState project_bell_pair(const InternalState& state, BellKind kind, int i, int j) {
  const auto bell = bell_state(kind, i, j, std::max({i, j, state.slots().empty() ? 0 : state.slots().back()}));
  return tensor(bell, partial_inner(bell, state));
}

Eigen::Matrix4cd bell_decompose(const InternalState& state, std::pair<int, int> pair1,
                                std::pair<int, int> pair2) {
  const std::set<int> distinct{pair1.first, pair1.second, pair2.first, pair2.second};
  if (distinct.size() != 4) throw Error(ErrorKind::OverlappingSlots, "Bell pairs must use four distinct slots");
  if (state.n_slots() != 4) throw Error(ErrorKind::NotFourSlot, "Bell decomposition needs a 4-slot state");
  if (!std::equal(distinct.begin(), distinct.end(), state.slots().begin())) {
    throw Error(ErrorKind::OverlappingSlots, "Bell pairs do not match the state's slots");
  }
  const int n = state.slots().back();
  Eigen::Matrix4cd c;
  for (BellKind m : kBellKinds) {
    const auto bm = bell_state(m, pair1.first, pair1.second, n);
    for (BellKind k : kBellKinds) {
      const auto basis = tensor(bm, bell_state(k, pair2.first, pair2.second, n));
      c(static_cast<int>(m), static_cast<int>(k)) = inner_product(basis, state);
    }
  }
  return c;
}

InternalState bell_recompose(const Eigen::Matrix4cd& coefficients, std::pair<int, int> pair1,
                             std::pair<int, int> pair2) {
  const int n = std::max({pair1.first, pair1.second, pair2.first, pair2.second});
  std::optional<InternalState> out;
  for (BellKind m : kBellKinds) {
    const auto bm = bell_state(m, pair1.first, pair1.second, n);
    for (BellKind k : kBellKinds) {
      auto term = coefficients(static_cast<int>(m), static_cast<int>(k)) *
                  tensor(bm, bell_state(k, pair2.first, pair2.second, n));
      out = out ? *out + term : term;
    }
  }
  return *out;
}

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix(std::vector<int> slots, Eigen::MatrixXcd entries)
    : slots_(std::move(slots)), entries_(std::move(entries)) {
  const auto d = static_cast<Eigen::Index>(dim(slots_.size()));
  if (entries_.rows() != d || entries_.cols() != d) {
    throw Error(ErrorKind::SlotCountMismatch, "density matrix must be 2^n x 2^n");
  }
}

Eigen::VectorXd DensityMatrix::eigenvalues() const {
  const Eigen::MatrixXcd herm = 0.5 * (entries_ + entries_.adjoint());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(herm, Eigen::EigenvaluesOnly).eigenvalues();
}

bool DensityMatrix::is_valid(double tol, double psd_tol) const {
  if ((entries_ - entries_.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(entries_.trace() - Complex{1.0}) > tol) return false;
  return eigenvalues().minCoeff() >= -psd_tol;
}

DensityMatrix pure_density(const InternalState& state) {
  return DensityMatrix(state.slots(), state.amplitudes() * state.amplitudes().adjoint());
}

namespace {

std::vector<int> checked_keep(const std::vector<int>& slots, std::span<const int> keep) {
  if (keep.empty()) throw Error(ErrorKind::EmptyKeep, "keep set is empty");
  auto k = sorted_unique(keep, ErrorKind::InvalidSlot);
  positions_of(slots, k);
  if (k.size() == slots.size()) throw Error(ErrorKind::KeepAll, "keep set must be a strict subset");
  return k;
}

}  // namespace

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  const auto kept = checked_keep(rho.slots(), keep);
  const auto traced = complement(rho.slots(), kept);
  const auto k = rho.slots().size();
  const auto pk = positions_of(rho.slots(), kept);
  const auto pt = positions_of(rho.slots(), traced);
  const auto dk = static_cast<Eigen::Index>(dim(kept.size()));
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dk, dk);
  for (std::size_t r = 0; r < dim(traced.size()); ++r) {
    const std::size_t base = scatter(0, r, pt, k);
    for (Eigen::Index i = 0; i < dk; ++i) {
      const auto row = static_cast<Eigen::Index>(scatter(base, static_cast<std::size_t>(i), pk, k));
      for (Eigen::Index j = 0; j < dk; ++j) {
        out(i, j) += rho.entries()(row, static_cast<Eigen::Index>(scatter(base, static_cast<std::size_t>(j), pk, k)));
      }
    }
  }
  return DensityMatrix(kept, std::move(out));
}

DensityMatrix reduced_density(const InternalState& state, std::span<const int> keep) {
  const auto kept = checked_keep(state.slots(), keep);
  const Eigen::MatrixXcd m = reshape(state, kept, complement(state.slots(), kept));
  return DensityMatrix(kept, m * m.adjoint());
}

DensityMatrix reduced_density(std::span<const std::pair<double, InternalState>> mixture,
                              std::span<const int> keep) {
  if (mixture.empty()) throw Error(ErrorKind::BadMixture, "empty mixture");
  double total = 0;
  std::optional<Eigen::MatrixXcd> acc;
  std::vector<int> kept;
  for (const auto& [w, s] : mixture) {
    if (w < 0) throw Error(ErrorKind::BadMixture, "negative mixture weight");
    if (s.slots() != mixture.front().second.slots()) {
      throw Error(ErrorKind::SlotCountMismatch, "mixture components on different slots");
    }
    const bool all = !keep.empty() && sorted_unique(keep, ErrorKind::InvalidSlot) == s.slots();
    const auto rho = all ? pure_density(s) : reduced_density(s, keep);
    kept = rho.slots();
    acc = acc ? Eigen::MatrixXcd(*acc + w * rho.entries()) : Eigen::MatrixXcd(w * rho.entries());
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::BadMixture, "mixture weights must sum to 1");
  return DensityMatrix(kept, *acc);
}

int schmidt_rank(const InternalState& state, std::span<const int> part_a, std::span<const int> part_b) {
  std::vector<int> a, b;
  check_bipartition(state.slots(), part_a, part_b, a, b);
  const Eigen::MatrixXcd m = reshape(state, a, b);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues();
  return static_cast<int>((sv.array() > kRankTol).count());
}

bool is_entangled(const InternalState& state, std::span<const int> part_a, std::span<const int> part_b) {
  return schmidt_rank(state, part_a, part_b) > 1;
}

bool is_entangled(const DensityMatrix& rho, std::span<const int> part_a, std::span<const int> part_b) {
  std::vector<int> a, b;
  check_bipartition(rho.slots(), part_a, part_b, a, b);
  const auto k = rho.slots().size();
  const auto pa = positions_of(rho.slots(), a);
  const auto pb = positions_of(rho.slots(), b);
  const auto d = static_cast<Eigen::Index>(dim(k));
  Eigen::MatrixXcd pt(d, d);
  for (std::size_t ia = 0; ia < dim(a.size()); ++ia) {
    for (std::size_t ib = 0; ib < dim(b.size()); ++ib) {
      const std::size_t row = scatter(scatter(0, ia, pa, k), ib, pb, k);
      for (std::size_t ja = 0; ja < dim(a.size()); ++ja) {
        for (std::size_t jb = 0; jb < dim(b.size()); ++jb) {
          const std::size_t col = scatter(scatter(0, ja, pa, k), jb, pb, k);
          // Transpose the B indices only.
          const std::size_t src_row = scatter(scatter(0, ia, pa, k), jb, pb, k);
          const std::size_t src_col = scatter(scatter(0, ja, pa, k), ib, pb, k);
          pt(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
              rho.entries()(static_cast<Eigen::Index>(src_row), static_cast<Eigen::Index>(src_col));
        }
      }
    }
  }
  const Eigen::MatrixXcd herm = 0.5 * (pt + pt.adjoint());
  const double min_ev =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(herm, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  return min_ev < -kRankTol;
}

bool pair_entangled(const InternalState& state, int i, int j) {
  const std::array<int, 2> keep{std::min(i, j), std::max(i, j)};
  const std::array<int, 1> a{i}, b{j};
  if (state.n_slots() == 2) return is_entangled(state, a, b);
  return is_entangled(reduced_density(state, keep), a, b);
}

std::string render(const InternalState& state) {
  if (state.n_slots() == 0) return format_coefficient(state.amplitudes()[0]);
  if (state.amplitudes().cwiseAbs().maxCoeff() < 1e-12) return "0";
  std::vector<InternalState> factors;
  factorize(state, factors);
  Complex coefficient = 1.0;
  std::vector<std::string> pieces;
  for (const auto& f : factors) {
    const Complex lead = leading_entry(f.amplitudes());
    coefficient *= lead;
    pieces.push_back(render_factor((1.0 / lead) * f));
  }
  std::string out;
  if (near(coefficient, -1.0)) {
    out = "-";
  } else if (!near(coefficient, 1.0)) {
    out = format_coefficient(coefficient);
  }
  for (const auto& piece : pieces) {
    if (!out.empty() && out != "-" && piece.front() != '(') out += ' ';
    out += piece;
  }
  return out;
}

}  // namespace pilotwave
