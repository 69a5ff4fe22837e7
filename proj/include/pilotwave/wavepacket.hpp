#pragma once

// Analytic Gaussian wavepackets for a single spatial degree of freedom.
//
// A packet is described by its parameters at birth,
//   psi(x) = N exp(-(x - center)^2 / (4 sigma^2)) exp(i (k x + phase)),
// plus the time elapsed since birth under free (V = 0) evolution. The
// evolved packet keeps the same closed form with a complex width
//   s = sigma^2 + i (hbar/m) elapsed / 2,
// drifting centre center + (hbar k/m) elapsed and phase
// phase - (hbar k^2 / 2m) elapsed.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pilotwave/error.hpp"

namespace pilotwave {

struct PhysicalParams {
  double hbar = 1.0;
  std::vector<double> masses;  ///< one per degree of freedom

  double mass(std::size_t dof) const { return dof < masses.size() ? masses[dof] : 1.0; }
};

template <typename Scalar>
struct BasicGaussianPacket {
  using Complex = std::complex<Scalar>;

  Scalar center{0};
  Scalar sigma{1};
  Scalar wavenumber{0};
  Scalar phase{0};
  Scalar born_at{0};
  Scalar elapsed{0};         ///< time since born_at
  Scalar hbar_over_mass{0};  ///< propagation constant used for `elapsed`

  static BasicGaussianPacket make(Scalar center, Scalar sigma, Scalar wavenumber = 0, Scalar phase = 0,
                                  Scalar born_at = 0) {
    if (!(sigma > 0)) throw Error(ErrorKind::InvalidArgument, "packet sigma must be positive");
    return BasicGaussianPacket{center, sigma, wavenumber, phase, born_at, 0, 0};
  }

  Complex width_squared() const { return Complex(sigma * sigma, hbar_over_mass * elapsed / 2); }
  Scalar current_center() const { return center + hbar_over_mass * wavenumber * elapsed; }
  Scalar current_phase() const { return phase - hbar_over_mass * wavenumber * wavenumber * elapsed / 2; }
  Scalar current_sigma() const { return std::abs(width_squared()) / sigma; }
  Scalar time() const { return born_at + elapsed; }

  /// Same packet up to free evolution and birth time.
  bool same_shape(const BasicGaussianPacket& o) const {
    return center == o.center && sigma == o.sigma && wavenumber == o.wavenumber && phase == o.phase;
  }

  bool operator==(const BasicGaussianPacket&) const = default;
};

using GaussianPacket = BasicGaussianPacket<double>;

template <typename Scalar>
std::complex<Scalar> evaluate(const BasicGaussianPacket<Scalar>& p, Scalar x) {
  using C = std::complex<Scalar>;
  const C s = p.width_squared();
  const Scalar norm = std::pow(2 * std::numbers::pi_v<Scalar> * p.sigma * p.sigma, Scalar(-0.25));
  const Scalar dx = x - p.current_center();
  return norm * std::sqrt(C(p.sigma * p.sigma) / s) *
         std::exp(-dx * dx / (Scalar(4) * s) + C(0, p.wavenumber * x + p.current_phase()));
}

template <typename Scalar>
std::complex<Scalar> gradient(const BasicGaussianPacket<Scalar>& p, Scalar x) {
  using C = std::complex<Scalar>;
  const C s = p.width_squared();
  return evaluate(p, x) * (-(x - p.current_center()) / (Scalar(2) * s) + C(0, p.wavenumber));
}

template <typename Scalar>
Scalar density(const BasicGaussianPacket<Scalar>& p, Scalar x) {
  return std::norm(evaluate(p, x));
}

/// Closed interval |x - centre| <= n_sigma * sigma(t).
template <typename Scalar>
bool support_contains(const BasicGaussianPacket<Scalar>& p, Scalar x, Scalar n_sigma = 5) {
  return std::abs(x - p.current_center()) <= n_sigma * p.current_sigma();
}

/// Truncated supports do not intersect; touching intervals overlap.
template <typename Scalar>
bool disjoint(const BasicGaussianPacket<Scalar>& p1, const BasicGaussianPacket<Scalar>& p2, Scalar n_sigma = 5) {
  return std::abs(p1.current_center() - p2.current_center()) >
         n_sigma * (p1.current_sigma() + p2.current_sigma());
}

/// Packet at absolute time t under V = 0.
template <typename Scalar>
BasicGaussianPacket<Scalar> free_evolve(const BasicGaussianPacket<Scalar>& p, Scalar hbar, Scalar mass, Scalar t) {
  if (!(hbar > 0) || !(mass > 0)) throw Error(ErrorKind::InvalidArgument, "hbar and mass must be positive");
  if (t < p.time()) throw Error(ErrorKind::InvalidArgument, "free_evolve cannot run backwards in time");
  const Scalar rate = hbar / mass;
  if (p.elapsed > 0 && p.hbar_over_mass != rate) {
    throw Error(ErrorKind::InvalidArgument, "packet was evolved with a different hbar/m");
  }
  BasicGaussianPacket<Scalar> out = p;
  out.elapsed = t - p.born_at;
  out.hbar_over_mass = out.elapsed > 0 ? rate : Scalar(0);
  return out;
}

template <typename Scalar>
BasicGaussianPacket<Scalar> free_evolve(const BasicGaussianPacket<Scalar>& p, const PhysicalParams& params,
                                        std::size_t dof, Scalar t) {
  return free_evolve(p, Scalar(params.hbar), Scalar(params.mass(dof)), t);
}

/// <p1|p2> = integral of conj(p1) p2 over the real line.
template <typename Scalar>
std::complex<Scalar> overlap(const BasicGaussianPacket<Scalar>& p1, const BasicGaussianPacket<Scalar>& p2) {
  using C = std::complex<Scalar>;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const C a1 = std::conj(Scalar(1) / (Scalar(4) * p1.width_squared()));
  const C a2 = Scalar(1) / (Scalar(4) * p2.width_squared());
  const Scalar c1 = p1.current_center();
  const Scalar c2 = p2.current_center();
  const C n1 = std::conj(std::pow(2 * pi * p1.sigma * p1.sigma, Scalar(-0.25)) *
                         std::sqrt(C(p1.sigma * p1.sigma) / p1.width_squared()));
  const C n2 = std::pow(2 * pi * p2.sigma * p2.sigma, Scalar(-0.25)) *
               std::sqrt(C(p2.sigma * p2.sigma) / p2.width_squared());
  // Exponent -P x^2 + Q x + R.
  const C P = a1 + a2;
  const C Q = Scalar(2) * (a1 * c1 + a2 * c2) + C(0, p2.wavenumber - p1.wavenumber);
  const C R = -a1 * c1 * c1 - a2 * c2 * c2 + C(0, p2.current_phase() - p1.current_phase());
  return n1 * n2 * std::sqrt(C(pi) / P) * std::exp(Q * Q / (Scalar(4) * P) + R);
}

}  // namespace pilotwave
