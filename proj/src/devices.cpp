#include "pilotwave/devices.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "pilotwave/error.hpp"
#include "pilotwave/stats.hpp"

namespace pilotwave {

namespace {

constexpr double kZeroNorm = 1e-24;

std::string append_token(const std::string& label, const std::string& device, std::string_view outcome) {
  return fmt::format("{}/{}:{}", label, device, outcome);
}

void require_disjoint(std::span<const GaussianPacket> packets, double n_sigma, const std::string& what) {
  for (std::size_t i = 0; i < packets.size(); ++i) {
    for (std::size_t j = i + 1; j < packets.size(); ++j) {
      if (!disjoint(packets[i], packets[j], n_sigma)) {
        throw Error(ErrorKind::NonDisjointOutputs,
                    fmt::format("{}: packets {} and {} (centres {:.6g}, {:.6g}) overlap at {} sigma", what, i, j,
                                packets[i].current_center(), packets[j].current_center(), n_sigma));
      }
    }
  }
}

double truncated_density(const GaussianPacket& p, double x, double n_sigma) {
  return support_contains(p, x, n_sigma) ? density(p, x) : 0.0;
}

double truncated_cdf(const GaussianPacket& p, double x, double n_sigma) {
  const double lo = stats::normal_cdf(-n_sigma);
  const double hi = stats::normal_cdf(n_sigma);
  const double z = (x - p.current_center()) / p.current_sigma();
  return std::clamp((stats::normal_cdf(z) - lo) / (hi - lo), 0.0, 1.0);
}

double truncated_quantile(const GaussianPacket& p, double u, double n_sigma) {
  const double lo = stats::normal_cdf(-n_sigma);
  const double hi = stats::normal_cdf(n_sigma);
  u = std::clamp(u, 1e-12, 1.0 - 1e-12);
  const double z = std::clamp(stats::normal_quantile(lo + u * (hi - lo)), -n_sigma, n_sigma);
  return p.current_center() + z * p.current_sigma();
}

bool branch_less(const Branch& x, const Branch& y) {
  if (x.label != y.label) return x.label < y.label;
  for (std::size_t d = 0; d < x.packets.size() && d < y.packets.size(); ++d) {
    const double cx = x.packets[d].current_center();
    const double cy = y.packets[d].current_center();
    if (cx != cy) return cx < cy;
    if (x.packets[d].sigma != y.packets[d].sigma) return x.packets[d].sigma < y.packets[d].sigma;
  }
  return false;
}

}  // namespace

std::pair<Complex, InternalState> canonical_split(const InternalState& v) {
  const double n2 = v.norm_squared();
  if (!(n2 > kZeroNorm)) throw Error(ErrorKind::ZeroNorm, "cannot normalize a zero internal vector");
  const auto& amps = v.amplitudes();
  const double cutoff = 1e-9 * amps.cwiseAbs().maxCoeff();
  Eigen::Index lead = 0;
  while (std::abs(amps[lead]) <= cutoff) ++lead;
  const Complex amp = std::sqrt(n2) * amps[lead] / std::abs(amps[lead]);
  Eigen::VectorXcd out = amps / amp;
  out[lead] = std::abs(out[lead]);
  return {amp, InternalState(v.slots(), std::move(out))};
}

BranchRewrite identity_rewrite() {
  BranchRewrite rw;
  rw.name = "identity";
  rw.rule = [](const Branch& b) { return std::vector<Branch>{b}; };
  return rw;
}

BranchRewrite stern_gerlach(std::string name, int slot, std::size_t dof, const GaussianPacket& out_a,
                            const GaussianPacket& out_b, std::optional<GaussianPacket> ready, double n_sigma) {
  const std::array<GaussianPacket, 2> outs{out_a, out_b};
  require_disjoint(outs, n_sigma, fmt::format("stern_gerlach '{}'", name));
  BranchRewrite rw;
  rw.name = name;
  rw.dofs = {dof};
  rw.slots = {slot};
  rw.primary_dof = dof;
  rw.rule = [name, slot, dof, outs, ready](const Branch& b) {
    if (ready && !b.packets.at(dof).same_shape(*ready)) {
      throw Error(ErrorKind::PacketNotReady,
                  fmt::format("{}: dof {} packet at {:.6g} is not the ready packet", name, dof,
                              b.packets[dof].current_center()));
    }
    std::vector<Branch> out;
    for (SpinLabel label : {SpinLabel::A, SpinLabel::B}) {
      const InternalState comp = project_slot(b.internal, slot, label);
      if (comp.norm_squared() <= kZeroNorm) continue;
      auto [amp, internal] = canonical_split(comp);
      Branch nb = b;
      nb.amplitude = b.amplitude * amp;
      nb.internal = std::move(internal);
      nb.packets[dof] = outs[static_cast<std::size_t>(label)];
      nb.label = append_token(b.label, name, std::string(1, to_char(label)));
      out.push_back(std::move(nb));
    }
    return out;
  };
  return rw;
}

BranchRewrite bellometer(const BellometerSetup& s) {
  std::vector<GaussianPacket> pointer_packets{s.ready};
  pointer_packets.insert(pointer_packets.end(), s.outputs.begin(), s.outputs.end());
  require_disjoint(pointer_packets, s.n_sigma, fmt::format("bellometer '{}' pointer", s.name));
  BranchRewrite rw;
  rw.name = s.name;
  rw.dofs = {s.dof_i, s.dof_j, s.pointer};
  std::sort(rw.dofs.begin(), rw.dofs.end());
  rw.slots = {s.slots.first, s.slots.second};
  rw.primary_dof = s.pointer;
  rw.rule = [s](const Branch& b) {
    if (!b.packets.at(s.pointer).same_shape(s.ready)) {
      throw Error(ErrorKind::PointerNotReady,
                  fmt::format("{}: pointer packet at {:.6g} is not the ready packet at {:.6g}", s.name,
                              b.packets[s.pointer].current_center(), s.ready.center));
    }
    std::vector<Branch> out;
    for (BellKind kind : kBellKinds) {
      const InternalState comp = project_bell_pair(b.internal, kind, s.slots.first, s.slots.second);
      if (comp.norm_squared() <= kZeroNorm) continue;
      auto [amp, internal] = canonical_split(comp);
      Branch nb = b;
      nb.amplitude = b.amplitude * amp;
      nb.internal = std::move(internal);
      nb.packets[s.pointer] = s.outputs[static_cast<std::size_t>(kind)];
      nb.packets[s.dof_i] = s.dustbin_i;
      nb.packets[s.dof_j] = s.dustbin_j;
      nb.label = append_token(b.label, s.name, to_string(kind));
      out.push_back(std::move(nb));
    }
    return out;
  };
  return rw;
}

BranchRewrite recombine_pointer(std::string name, std::size_t pointer, const std::array<GaussianPacket, 4>& inputs,
                                const GaussianPacket& ready, std::pair<int, int> slots, double n_sigma) {
  std::vector<GaussianPacket> pointer_packets{ready};
  pointer_packets.insert(pointer_packets.end(), inputs.begin(), inputs.end());
  require_disjoint(pointer_packets, n_sigma, fmt::format("recombine '{}' pointer", name));
  BranchRewrite rw;
  rw.name = name;
  rw.dofs = {pointer};
  rw.slots = {slots.first, slots.second};
  rw.primary_dof = pointer;
  rw.rule = [name, pointer, inputs, ready, slots](const Branch& b) {
    const auto& p = b.packets.at(pointer);
    const auto it = std::find_if(inputs.begin(), inputs.end(), [&](const auto& q) { return p.same_shape(q); });
    if (it == inputs.end()) {
      throw Error(ErrorKind::StructureMismatch,
                  fmt::format("{}: pointer packet at {:.6g} is none of the Bell outputs", name, p.current_center()));
    }
    const auto kind = static_cast<BellKind>(it - inputs.begin());
    const double on_kind = project_bell_pair(b.internal, kind, slots.first, slots.second).norm_squared();
    if (std::abs(on_kind - b.internal.norm_squared()) > 1e-12) {
      throw Error(ErrorKind::StructureMismatch,
                  fmt::format("{}: branch with pointer {} is not purely {}({}, {})", name, to_string(kind),
                              to_string(kind), slots.first, slots.second));
    }
    Branch nb = b;
    nb.packets[pointer] = ready;
    const std::string suffix = fmt::format(":{}", to_string(kind));
    const auto slash = nb.label.rfind('/');
    if (slash != std::string::npos && nb.label.ends_with(suffix)) {
      nb.label.erase(slash);
    } else {
      nb.label = append_token(nb.label, name, "ready");
    }
    return std::vector<Branch>{nb};
  };
  return rw;
}

WaveFunction apply(const BranchRewrite& rewrite, const WaveFunction& psi) {
  const std::size_t nd = psi.registry().size();
  for (auto d : rewrite.dofs) {
    if (d >= nd) throw Error(ErrorKind::DomainMismatch, fmt::format("{}: dof {} not in registry", rewrite.name, d));
  }
  for (const auto& b : psi.branches()) {
    for (int slot : rewrite.slots) {
      if (b.internal.slot_position(slot) < 0) {
        throw Error(ErrorKind::DomainMismatch, fmt::format("{}: slot {} not in state", rewrite.name, slot));
      }
    }
  }

  std::vector<Branch> raw;
  for (const auto& b : psi.branches()) {
    for (auto& nb : rewrite.rule(b)) raw.push_back(std::move(nb));
  }

  std::vector<Branch> merged;
  std::vector<bool> used(raw.size(), false);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (used[i]) continue;
    InternalState sum = raw[i].amplitude * raw[i].internal;
    std::string label = raw[i].label;
    for (std::size_t j = i + 1; j < raw.size(); ++j) {
      if (used[j] || raw[j].packets != raw[i].packets) continue;
      used[j] = true;
      sum = sum + raw[j].amplitude * raw[j].internal;
      label = std::min(label, raw[j].label);
    }
    if (sum.norm_squared() <= kZeroNorm) continue;
    auto [amp, internal] = canonical_split(sum);
    merged.push_back(Branch{amp, std::move(internal), raw[i].packets, std::move(label)});
  }
  std::sort(merged.begin(), merged.end(), branch_less);

  WaveFunction out(psi.registry(), std::move(merged), psi.is_effective());
  const double before = psi.norm_squared();
  const double after = out.norm_squared();
  if (std::abs(after - before) > 1e-12 * std::max(1.0, before)) {
    throw Error(ErrorKind::NonUnitary,
                fmt::format("{}: norm {:.15g} became {:.15g}", rewrite.name, before, after));
  }
  return out;
}

OutcomeLabel readout(const std::string& device, const Configuration& c, std::size_t dof,
                     std::span<const OutcomePacket> outcomes, double n_sigma) {
  if (static_cast<Eigen::Index>(dof) >= c.size()) throw Error(ErrorKind::DomainMismatch, "readout dof out of range");
  const double x = c[static_cast<Eigen::Index>(dof)];
  const OutcomePacket* hit = nullptr;
  int hits = 0;
  for (const auto& o : outcomes) {
    if (support_contains(o.packet, x, n_sigma)) {
      hit = &o;
      ++hits;
    }
  }
  if (hits != 1) {
    throw Error(ErrorKind::AmbiguousReadout,
                fmt::format("{}: position {:.6g} lies in {} outcome supports", device, x, hits));
  }
  return {device, hit->label};
}

Configuration resolve_positions_after_event(const WaveFunction& pre, const WaveFunction& post,
                                            const Configuration& c_pre, const BranchRewrite& rewrite,
                                            double n_sigma) {
  if (rewrite.dofs.empty()) return c_pre;
  const std::size_t nd = post.registry().size();
  if (static_cast<std::size_t>(c_pre.size()) != nd) {
    throw Error(ErrorKind::DomainMismatch, "configuration size differs from the dof count");
  }
  std::vector<bool> moved(nd, false);
  for (auto d : rewrite.dofs) moved.at(d) = true;
  const auto x = [&](std::size_t d) { return c_pre[static_cast<Eigen::Index>(d)]; };

  // Pre-event conditional quantile of each moved dof given all other coordinates.
  std::vector<double> quantile(nd, 0.0);
  for (auto d : rewrite.dofs) {
    double weight_sum = 0, cdf_sum = 0;
    for (const auto& b : pre.branches()) {
      double w = std::norm(b.amplitude);
      for (std::size_t e = 0; e < nd && w > 0; ++e) {
        if (e != d) w *= truncated_density(b.packets[e], x(e), n_sigma);
      }
      if (w <= 0) continue;
      weight_sum += w;
      cdf_sum += w * truncated_cdf(b.packets[d], x(d), n_sigma);
    }
    if (!(weight_sum > 0)) {
      throw Error(ErrorKind::NoSupportingBranch,
                  fmt::format("{}: pre-event configuration lies in no branch support", rewrite.name));
    }
    quantile[d] = cdf_sum / weight_sum;
  }

  // Post-event branch weights conditional on the unmoved coordinates.
  struct Candidate {
    std::size_t index;
    double weight;
  };
  std::vector<Candidate> candidates;
  double total = 0;
  for (std::size_t i = 0; i < post.size(); ++i) {
    const auto& b = post.branches()[i];
    double w = std::norm(b.amplitude);
    for (std::size_t e = 0; e < nd && w > 0; ++e) {
      if (!moved[e]) w *= truncated_density(b.packets[e], x(e), n_sigma);
    }
    if (w <= 0) continue;
    candidates.push_back({i, w});
    total += w;
  }
  if (!(total > 0)) {
    throw Error(ErrorKind::ZeroConditionalDensity,
                fmt::format("{}: unmoved coordinates have zero density after the event", rewrite.name));
  }
  const std::size_t primary = rewrite.primary_dof;
  std::stable_sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    const auto& pa = post.branches()[a.index];
    const auto& pb = post.branches()[b.index];
    const double ca = pa.packets[primary].current_center();
    const double cb = pb.packets[primary].current_center();
    if (ca != cb) return ca < cb;
    return pa.label < pb.label;
  });

  const double u = quantile[primary];
  double lo = 0;
  std::size_t pick = candidates.size() - 1;
  double residual = 0.5;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double hi = lo + candidates[k].weight / total;
    if (u < hi || k + 1 == candidates.size()) {
      pick = k;
      residual = std::clamp((u - lo) / (candidates[k].weight / total), 0.0, 1.0);
      break;
    }
    lo = hi;
  }

  const auto& chosen = post.branches()[candidates[pick].index];
  Configuration c = c_pre;
  for (auto d : rewrite.dofs) {
    const double q = d == primary ? residual : quantile[d];
    c[static_cast<Eigen::Index>(d)] = truncated_quantile(chosen.packets[d], q, n_sigma);
  }
  return c;
}

}  // namespace pilotwave
