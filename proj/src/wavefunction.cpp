#include "pilotwave/wavefunction.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "pilotwave/error.hpp"

namespace pilotwave {

DofRegistry::DofRegistry(std::vector<Dof> dofs) : dofs_(std::move(dofs)) {
  std::set<std::string> seen;
  for (const auto& d : dofs_) {
    if (!seen.insert(d.id).second) throw Error(ErrorKind::InvalidArgument, "duplicate dof id '" + d.id + "'");
    if (!(d.mass > 0)) throw Error(ErrorKind::InvalidArgument, "dof '" + d.id + "' needs a positive mass");
  }
}

std::size_t DofRegistry::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < dofs_.size(); ++i) {
    if (dofs_[i].id == id) return i;
  }
  throw Error(ErrorKind::InvalidArgument, fmt::format("unknown dof '{}'", id));
}

PhysicalParams DofRegistry::physical_params(double hbar) const {
  PhysicalParams p;
  p.hbar = hbar;
  for (const auto& d : dofs_) p.masses.push_back(d.mass);
  return p;
}

WaveFunction::WaveFunction(DofRegistry registry, std::vector<Branch> branches, bool effective)
    : registry_(std::move(registry)), branches_(std::move(branches)), effective_(effective) {
  const auto n = static_cast<Eigen::Index>(branches_.size());
  for (const auto& b : branches_) {
    if (b.packets.size() != registry_.size()) {
      throw Error(ErrorKind::DomainMismatch,
                  fmt::format("branch '{}' has {} packets for {} dofs", b.label, b.packets.size(), registry_.size()));
    }
    if (b.internal.slots() != branches_.front().internal.slots()) {
      throw Error(ErrorKind::SlotCountMismatch, "branches carry internal states on different slots");
    }
  }
  gram_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const auto& bi = branches_[static_cast<std::size_t>(i)];
      const auto& bj = branches_[static_cast<std::size_t>(j)];
      gram_(i, j) = std::conj(bi.amplitude) * bj.amplitude * inner_product(bi.internal, bj.internal);
      gram_(j, i) = std::conj(gram_(i, j));
    }
  }
}

double WaveFunction::norm_squared() const {
  double total = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    for (std::size_t j = 0; j < branches_.size(); ++j) {
      Complex g = gram_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (g == Complex{0.0}) continue;
      for (std::size_t d = 0; d < registry_.size(); ++d) {
        g *= overlap(branches_[i].packets[d], branches_[j].packets[d]);
      }
      total += g.real();
    }
  }
  return total;
}

Eigen::VectorXcd WaveFunction::branch_values(const Configuration& c) const {
  if (static_cast<std::size_t>(c.size()) != registry_.size()) {
    throw Error(ErrorKind::DomainMismatch, "configuration size differs from the dof count");
  }
  Eigen::VectorXcd v(static_cast<Eigen::Index>(branches_.size()));
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    Complex value = 1.0;
    for (std::size_t d = 0; d < registry_.size(); ++d) {
      value *= evaluate(branches_[b].packets[d], c[static_cast<Eigen::Index>(d)]);
    }
    v[static_cast<Eigen::Index>(b)] = value;
  }
  return v;
}

double born_density(const WaveFunction& psi, const Configuration& c) {
  if (psi.size() == 0) return 0.0;
  const Eigen::VectorXcd v = psi.branch_values(c);
  return std::max(0.0, (v.adjoint() * psi.gram() * v)(0).real());
}

bool branches_orthogonal(const WaveFunction& psi, double n_sigma) {
  const auto& bs = psi.branches();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    for (std::size_t j = i + 1; j < bs.size(); ++j) {
      if (std::abs(inner_product(bs[i].internal, bs[j].internal)) < 1e-12) continue;
      bool separated = false;
      for (std::size_t d = 0; d < psi.registry().size() && !separated; ++d) {
        separated = disjoint(bs[i].packets[d], bs[j].packets[d], n_sigma);
      }
      if (!separated) return false;
    }
  }
  return true;
}

Configuration sample_configuration(const WaveFunction& psi, std::mt19937_64& rng, double n_sigma) {
  if (psi.size() == 0) throw Error(ErrorKind::ZeroNorm, "cannot sample an empty wavefunction");
  if (!branches_orthogonal(psi, n_sigma)) {
    throw Error(ErrorKind::NonOrthogonalBranches, "branches interfere; refusing to sample");
  }
  std::vector<double> weights;
  for (Eigen::Index i = 0; i < psi.gram().rows(); ++i) weights.push_back(psi.gram()(i, i).real());
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const auto& branch = psi.branches()[pick(rng)];
  std::normal_distribution<double> normal(0.0, 1.0);
  Configuration c(static_cast<Eigen::Index>(psi.registry().size()));
  for (std::size_t d = 0; d < psi.registry().size(); ++d) {
    double z = 0;
    do {
      z = normal(rng);
    } while (std::abs(z) > n_sigma);
    const auto& p = branch.packets[d];
    c[static_cast<Eigen::Index>(d)] = p.current_center() + z * p.current_sigma();
  }
  return c;
}

std::vector<std::size_t> supporting_branches(const WaveFunction& psi, const Configuration& c, double n_sigma) {
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < psi.size(); ++b) {
    bool inside = true;
    for (std::size_t d = 0; d < psi.registry().size() && inside; ++d) {
      inside = support_contains(psi.branches()[b].packets[d], c[static_cast<Eigen::Index>(d)], n_sigma);
    }
    if (inside) out.push_back(b);
  }
  return out;
}

WaveFunction effective_branches(const WaveFunction& psi, const Configuration& c, double n_sigma) {
  const auto idx = supporting_branches(psi, c, n_sigma);
  if (idx.empty()) {
    std::string where;
    for (Eigen::Index d = 0; d < c.size(); ++d) where += fmt::format("{}{:.6g}", d ? ", " : "", c[d]);
    throw Error(ErrorKind::NoSupportingBranch, "configuration (" + where + ") lies in no branch support");
  }
  std::vector<Branch> kept;
  for (auto i : idx) kept.push_back(psi.branches()[i]);
  return renormalize(WaveFunction(psi.registry(), std::move(kept), true));
}

WaveFunction renormalize(const WaveFunction& psi) {
  const double n2 = psi.norm_squared();
  if (!(n2 > 0)) throw Error(ErrorKind::ZeroNorm, "wavefunction has zero norm");
  std::vector<Branch> bs = psi.branches();
  const double scale = 1.0 / std::sqrt(n2);
  for (auto& b : bs) b.amplitude *= scale;
  return WaveFunction(psi.registry(), std::move(bs), psi.is_effective());
}

WaveFunction free_evolve(const WaveFunction& psi, double hbar, double t) {
  std::vector<Branch> bs = psi.branches();
  for (auto& b : bs) {
    for (std::size_t d = 0; d < b.packets.size(); ++d) {
      b.packets[d] = free_evolve(b.packets[d], hbar, psi.registry()[d].mass, t);
    }
  }
  return WaveFunction(psi.registry(), std::move(bs), psi.is_effective());
}

DensityMatrix internal_density(const WaveFunction& psi) {
  if (psi.size() == 0) throw Error(ErrorKind::ZeroNorm, "empty wavefunction");
  const auto& bs = psi.branches();
  const auto dim = bs.front().internal.amplitudes().size();
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
  for (std::size_t i = 0; i < bs.size(); ++i) {
    for (std::size_t j = 0; j < bs.size(); ++j) {
      Complex w = bs[i].amplitude * std::conj(bs[j].amplitude);
      for (std::size_t d = 0; d < psi.registry().size() && w != Complex{0.0}; ++d) {
        w *= overlap(bs[j].packets[d], bs[i].packets[d]);
      }
      if (w == Complex{0.0}) continue;
      rho += w * bs[i].internal.amplitudes() * bs[j].internal.amplitudes().adjoint();
    }
  }
  const Complex tr = rho.trace();
  if (!(std::abs(tr) > 0)) throw Error(ErrorKind::ZeroNorm, "internal density has zero trace");
  return DensityMatrix(bs.front().internal.slots(), rho / tr);
}

bool approx_equal(const WaveFunction& a, const WaveFunction& b, double tol) {
  if (!(a.registry() == b.registry()) || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.branches()[i];
    const auto& y = b.branches()[i];
    if (std::abs(x.amplitude - y.amplitude) > tol || !x.internal.approx_equal(y.internal, tol)) return false;
    for (std::size_t d = 0; d < x.packets.size(); ++d) {
      const auto& p = x.packets[d];
      const auto& q = y.packets[d];
      const double diff = std::max({std::abs(p.center - q.center), std::abs(p.sigma - q.sigma),
                                    std::abs(p.wavenumber - q.wavenumber), std::abs(p.phase - q.phase),
                                    std::abs(p.born_at - q.born_at), std::abs(p.elapsed - q.elapsed),
                                    std::abs(p.hbar_over_mass - q.hbar_over_mass)});
      if (diff > tol) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json complex_json(Complex c) { return nlohmann::json::array({c.real(), c.imag()}); }
Complex complex_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

nlohmann::json to_json(const GaussianPacket& p) {
  return {{"center", p.center},   {"sigma", p.sigma},     {"wavenumber", p.wavenumber},
          {"phase", p.phase},     {"born_at", p.born_at}, {"elapsed", p.elapsed},
          {"hbar_over_mass", p.hbar_over_mass}};
}

GaussianPacket packet_from_json(const nlohmann::json& j) {
  auto p = GaussianPacket::make(j.at("center").get<double>(), j.at("sigma").get<double>(),
                                j.value("wavenumber", 0.0), j.value("phase", 0.0), j.value("born_at", 0.0));
  p.elapsed = j.value("elapsed", 0.0);
  p.hbar_over_mass = j.value("hbar_over_mass", 0.0);
  return p;
}

nlohmann::json to_json(const WaveFunction& psi) {
  nlohmann::json dofs = nlohmann::json::array();
  for (const auto& d : psi.registry().dofs()) {
    dofs.push_back({{"id", d.id}, {"role", d.role == DofRole::Pointer ? "pointer" : "particle"}, {"mass", d.mass}});
  }
  nlohmann::json branches = nlohmann::json::array();
  for (const auto& b : psi.branches()) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : b.internal.terms()) {
      std::string labels;
      for (auto l : t.labels) labels += to_char(l);
      terms.push_back({{"labels", labels}, {"amplitude", complex_json(t.amplitude)}});
    }
    nlohmann::json packets = nlohmann::json::object();
    for (std::size_t d = 0; d < b.packets.size(); ++d) packets[psi.registry()[d].id] = to_json(b.packets[d]);
    branches.push_back({{"amplitude", complex_json(b.amplitude)},
                        {"label", b.label},
                        {"internal", {{"slots", b.internal.slots()}, {"terms", terms}}},
                        {"packets", packets}});
  }
  return {{"dofs", dofs}, {"effective", psi.is_effective()}, {"branches", branches}};
}

WaveFunction wavefunction_from_json(const nlohmann::json& j) {
  std::vector<Dof> dofs;
  for (const auto& d : j.at("dofs")) {
    dofs.push_back({d.at("id").get<std::string>(),
                    d.at("role").get<std::string>() == "pointer" ? DofRole::Pointer : DofRole::Particle,
                    d.at("mass").get<double>()});
  }
  DofRegistry registry(std::move(dofs));
  std::vector<Branch> branches;
  for (const auto& jb : j.at("branches")) {
    Branch b;
    b.amplitude = complex_from(jb.at("amplitude"));
    b.label = jb.value("label", "");
    auto slots = jb.at("internal").at("slots").get<std::vector<int>>();
    Eigen::VectorXcd amps = Eigen::VectorXcd::Zero(Eigen::Index{1} << slots.size());
    for (const auto& t : jb.at("internal").at("terms")) {
      const auto labels = t.at("labels").get<std::string>();
      if (labels.size() != slots.size()) throw Error(ErrorKind::SlotCountMismatch, "term label length");
      Eigen::Index idx = 0;
      for (char ch : labels) idx = (idx << 1) | (ch == 'b' ? 1 : 0);
      amps[idx] = complex_from(t.at("amplitude"));
    }
    b.internal = InternalState(std::move(slots), std::move(amps));
    for (const auto& d : registry.dofs()) b.packets.push_back(packet_from_json(jb.at("packets").at(d.id)));
    branches.push_back(std::move(b));
  }
  return WaveFunction(std::move(registry), std::move(branches), j.value("effective", false));
}

}  // namespace pilotwave
