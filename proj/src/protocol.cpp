#include "pilotwave/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "pilotwave/error.hpp"
#include "pilotwave/spin_expr.hpp"
#include "pilotwave/stats.hpp"

namespace pilotwave {

namespace {

constexpr std::array<const char*, 4> kBellRoles = {"alpha", "beta", "gamma", "delta"};

std::string_view strip_kind(const Error& e) {
  std::string_view what = e.what();
  const auto prefix = to_string(e.kind());
  if (what.starts_with(prefix) && what.size() > prefix.size() + 2) what.remove_prefix(prefix.size() + 2);
  return what;
}

GaussianPacket born(GaussianPacket p, double t) {
  p.born_at = t;
  p.elapsed = 0;
  p.hbar_over_mass = 0;
  return p;
}

const std::string& role_packet(const DeviceSpec& d, const std::string& role) {
  const auto it = d.packets.find(role);
  if (it == d.packets.end()) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("device '{}' has no '{}' packet", d.name, role));
  }
  return it->second;
}

std::size_t dof_index(const ExchangeScenario& s, const DeviceSpec& d, std::size_t k) {
  if (k >= d.dofs.size()) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("device '{}' needs at least {} dofs", d.name, k + 1));
  }
  return s.registry().index_of(d.dofs[k]);
}

std::pair<int, int> slot_pair(const DeviceSpec& d) {
  if (d.slots.size() != 2) throw Error(ErrorKind::InvalidArgument, fmt::format("device '{}' needs two slots", d.name));
  return {d.slots[0], d.slots[1]};
}

WaveFunction at_time(const ExchangeScenario& s, const WaveFunction& psi, double t) {
  return s.evolution == Evolution::Free ? free_evolve(psi, s.hbar, t) : psi;
}

/// Bell kind of the two slots outside `pair` when they are in a pure Bell state.
std::optional<BellKind> partner_bell(const WaveFunction& eff, std::pair<int, int> pair) {
  if (eff.size() == 0) return std::nullopt;
  const auto& slots = eff.branches().front().internal.slots();
  std::vector<int> rest;
  for (int s : slots) {
    if (s != pair.first && s != pair.second) rest.push_back(s);
  }
  if (rest.size() != 2) return std::nullopt;
  const DensityMatrix rho = partial_trace(internal_density(eff), rest);
  for (BellKind kind : kBellKinds) {
    const auto v = bell_state(kind, rest[0], rest[1], std::max(rest[0], rest[1])).amplitudes();
    const double fidelity = (v.adjoint() * rho.entries() * v)(0).real();
    if (fidelity > 1.0 - 1e-10) return kind;
  }
  return std::nullopt;
}

nlohmann::json positions_json(const Configuration& c, const DofRegistry& registry) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t d = 0; d < registry.size(); ++d) j[registry[d].id] = c[static_cast<Eigen::Index>(d)];
  return j;
}

nlohmann::json table_json(const JointTable& t) {
  return {{"aa", t.counts[0][0]}, {"ab", t.counts[0][1]}, {"ba", t.counts[1][0]}, {"bb", t.counts[1][1]}};
}

}  // namespace

std::string_view to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::Bellometer: return "bellometer";
    case DeviceKind::SternGerlach: return "stern_gerlach";
    case DeviceKind::Recombine: return "recombine";
  }
  return "?";
}

DofRegistry ExchangeScenario::registry() const { return DofRegistry(dofs); }

const DeviceSpec& ExchangeScenario::device(const std::string& name) const {
  for (const auto& d : devices) {
    if (d.name == name) return d;
  }
  throw Error(ErrorKind::InvalidArgument, fmt::format("undefined device '{}'", name));
}

const GaussianPacket& ExchangeScenario::packet(const std::string& name) const {
  const auto it = packets.find(name);
  if (it == packets.end()) throw Error(ErrorKind::InvalidArgument, fmt::format("undefined packet '{}'", name));
  return it->second;
}

// ---------------------------------------------------------------------------
// Built-in scenarios

namespace {

ExchangeScenario exchange_skeleton(double mass, double sigma, double k_particle, double k_pointer) {
  ExchangeScenario s;
  s.dofs = {{"x1", DofRole::Particle, mass},
            {"x2", DofRole::Particle, mass},
            {"x3", DofRole::Particle, mass},
            {"x4", DofRole::Particle, mass},
            {"pointer", DofRole::Pointer, mass}};
  auto& p = s.packets;
  for (int i = 1; i <= 4; ++i) p[fmt::format("phi{}", i)] = GaussianPacket::make(0, sigma, k_particle);
  p["phi1_bin"] = GaussianPacket::make(-50, sigma, -k_particle);
  p["phi3_bin"] = GaussianPacket::make(50, sigma, k_particle);
  p["phi2_a"] = GaussianPacket::make(-10, sigma, k_particle);
  p["phi2_b"] = GaussianPacket::make(10, sigma, k_particle);
  p["phi4_a"] = GaussianPacket::make(-10, sigma, k_particle);
  p["phi4_b"] = GaussianPacket::make(10, sigma, k_particle);
  p["psi_0"] = GaussianPacket::make(0, sigma, k_pointer);
  p["psi_alpha"] = GaussianPacket::make(10, sigma, k_pointer);
  p["psi_beta"] = GaussianPacket::make(20, sigma, k_pointer);
  p["psi_gamma"] = GaussianPacket::make(30, sigma, k_pointer);
  p["psi_delta"] = GaussianPacket::make(40, sigma, k_pointer);
  s.initial_packets = {"phi1", "phi2", "phi3", "phi4", "psi_0"};

  DeviceSpec bell{"bell", DeviceKind::Bellometer, {1, 3}, {"x1", "x3", "pointer"}, {}};
  bell.packets = {{"ready", "psi_0"},       {"alpha", "psi_alpha"},  {"beta", "psi_beta"},
                  {"gamma", "psi_gamma"},   {"delta", "psi_delta"},  {"dustbin_i", "phi1_bin"},
                  {"dustbin_j", "phi3_bin"}};
  DeviceSpec sg2{"sg2", DeviceKind::SternGerlach, {2}, {"x2"}, {{"a", "phi2_a"}, {"b", "phi2_b"}, {"ready", "phi2"}}};
  DeviceSpec sg4{"sg4", DeviceKind::SternGerlach, {4}, {"x4"}, {{"a", "phi4_a"}, {"b", "phi4_b"}, {"ready", "phi4"}}};
  s.devices = {bell, sg2, sg4};
  s.events = {{1.0, "bell"}, {2.0, "sg2"}, {3.0, "sg4"}};
  s.runs = 10000;
  s.seed = 42;
  return s;
}

}  // namespace

ExchangeScenario default_exchange_scenario() {
  ExchangeScenario s = exchange_skeleton(1.0, 0.25, 0.0, 0.0);
  s.dt = 0.05;
  return s;
}

ExchangeScenario moving_exchange_scenario() {
  ExchangeScenario s = exchange_skeleton(100.0, 0.25, 100.0, 100.0);
  s.evolution = Evolution::Free;
  s.runs = 1000;
  s.t_end = 3.5;
  return s;
}

ExchangeScenario default_recombination_scenario() {
  ExchangeScenario s = default_exchange_scenario();
  DeviceSpec rec{"recombine", DeviceKind::Recombine, {1, 3}, {"pointer"}, {}};
  rec.packets = {{"ready", "psi_0"},     {"alpha", "psi_alpha"}, {"beta", "psi_beta"},
                 {"gamma", "psi_gamma"}, {"delta", "psi_delta"}};
  s.devices.push_back(rec);
  s.events = {{1.0, "bell"}, {2.0, "recombine"}, {3.0, "sg2"}, {4.0, "sg4"}};
  return s;
}

// ---------------------------------------------------------------------------

void validate(const ExchangeScenario& s) {
  if (!(s.hbar > 0)) throw Error(ErrorKind::InvalidArgument, "hbar must be positive");
  if (!(s.n_sigma > 0)) throw Error(ErrorKind::InvalidArgument, "n_sigma must be positive");
  if (s.dt && !(*s.dt > 0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (s.runs < 1) throw Error(ErrorKind::InvalidArgument, "runs must be at least 1");
  if (s.dofs.empty()) throw Error(ErrorKind::InvalidArgument, "no degrees of freedom declared");
  const DofRegistry registry = s.registry();
  if (s.initial_packets.size() != registry.size()) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("{} initial packets for {} dofs", s.initial_packets.size(), registry.size()));
  }
  for (const auto& name : s.initial_packets) s.packet(name);
  const InternalState initial = parse_state(s.initial_state);
  if (!(initial.norm_squared() > 0)) throw Error(ErrorKind::ZeroNorm, "initial internal state is zero");
  const auto has_slot = [&](int slot) { return initial.slot_position(slot) >= 0; };

  std::set<std::string> names;
  for (const auto& d : s.devices) {
    if (!names.insert(d.name).second) {
      throw Error(ErrorKind::InvalidArgument, fmt::format("device '{}' declared twice", d.name));
    }
    for (const auto& [role, packet] : d.packets) s.packet(packet);
    for (int slot : d.slots) {
      if (!has_slot(slot)) {
        throw Error(ErrorKind::InvalidSlot, fmt::format("device '{}' reads slot {} absent from the state", d.name, slot));
      }
    }
    for (std::size_t k = 0; k < d.dofs.size(); ++k) dof_index(s, d, k);
    // Construction checks roles and disjointness.
    build_rewrite(s, d, 0.0);
  }

  double last = -std::numeric_limits<double>::infinity();
  for (const auto& e : s.events) {
    s.device(e.device);
    if (!(e.time > last)) {
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("event '{}' at t = {:.6g} is not after the previous event", e.device, e.time));
    }
    if (e.time < 0) throw Error(ErrorKind::InvalidArgument, "event times must be non-negative");
    last = e.time;
  }
  if (s.t_end && !s.events.empty() && *s.t_end < s.events.back().time) {
    throw Error(ErrorKind::InvalidArgument, "t_end precedes the last event");
  }
}

WaveFunction initial_wavefunction(const ExchangeScenario& s) {
  const DofRegistry registry = s.registry();
  InternalState internal = parse_state(s.initial_state);
  const double n = std::sqrt(internal.norm_squared());
  if (!(n > 0)) throw Error(ErrorKind::ZeroNorm, "initial internal state is zero");
  internal = Complex(1.0 / n) * internal;
  std::vector<GaussianPacket> packets;
  for (const auto& name : s.initial_packets) packets.push_back(s.packet(name));
  return WaveFunction(registry, {Branch{1.0, std::move(internal), std::move(packets), "psi"}});
}

BranchRewrite build_rewrite(const ExchangeScenario& s, const DeviceSpec& d, double t) {
  const auto pk = [&](const std::string& role) { return born(s.packet(role_packet(d, role)), t); };
  switch (d.kind) {
    case DeviceKind::SternGerlach: {
      if (d.slots.size() != 1) throw Error(ErrorKind::InvalidArgument, fmt::format("device '{}' needs one slot", d.name));
      std::optional<GaussianPacket> ready;
      if (d.packets.contains("ready")) ready = s.packet(d.packets.at("ready"));
      return stern_gerlach(d.name, d.slots[0], dof_index(s, d, 0), pk("a"), pk("b"), ready, s.n_sigma);
    }
    case DeviceKind::Bellometer: {
      BellometerSetup setup;
      setup.name = d.name;
      setup.slots = slot_pair(d);
      setup.dof_i = dof_index(s, d, 0);
      setup.dof_j = dof_index(s, d, 1);
      setup.pointer = dof_index(s, d, 2);
      setup.ready = s.packet(role_packet(d, "ready"));
      for (std::size_t m = 0; m < 4; ++m) setup.outputs[m] = pk(kBellRoles[m]);
      setup.dustbin_i = pk("dustbin_i");
      setup.dustbin_j = pk("dustbin_j");
      setup.n_sigma = s.n_sigma;
      return bellometer(setup);
    }
    case DeviceKind::Recombine: {
      std::array<GaussianPacket, 4> inputs;
      for (std::size_t m = 0; m < 4; ++m) inputs[m] = s.packet(role_packet(d, kBellRoles[m]));
      return recombine_pointer(d.name, dof_index(s, d, 0), inputs, pk("ready"), slot_pair(d), s.n_sigma);
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown device kind");
}

std::vector<OutcomePacket> outcome_packets(const ExchangeScenario& s, const DeviceSpec& d, double t) {
  std::vector<OutcomePacket> out;
  switch (d.kind) {
    case DeviceKind::SternGerlach:
      for (const char* role : {"a", "b"}) out.push_back({born(s.packet(role_packet(d, role)), t), role});
      break;
    case DeviceKind::Bellometer:
      for (const char* role : kBellRoles) out.push_back({born(s.packet(role_packet(d, role)), t), role});
      break;
    case DeviceKind::Recombine: break;
  }
  return out;
}

std::size_t readout_dof(const ExchangeScenario& s, const DeviceSpec& d) {
  return dof_index(s, d, d.kind == DeviceKind::Bellometer ? 2 : 0);
}

std::string RunRecord::outcome(const std::string& device) const {
  for (const auto& e : events) {
    if (e.device == device) return e.outcome;
  }
  return {};
}

// ---------------------------------------------------------------------------
// Single runs

namespace {

struct Runner {
  const ExchangeScenario& s;
  const RunOptions& options;
  PhysicalParams params;
  RunRecord record;

  void integrate(const WaveFunction& psi, Configuration& c, double t0, double t1) {
    const WaveFunction start = at_time(s, psi, t0);
    const WaveFunction eff = effective_branches(start, c, s.n_sigma);
    const std::string label = effective_label(start, c, s.n_sigma);
    const WaveProvider provider =
        s.evolution == Evolution::Free ? WaveProvider::free(eff, s.hbar) : WaveProvider::frozen(eff);
    const double dt = options.dt.value_or(
        s.dt.value_or(default_dt(eff, params, s.evolution == Evolution::Free, 0.05)));
    Trajectory traj = evolve_trajectory(provider, c, t0, t1, dt, params, s.n_sigma);
    // Only the effective branch drives the motion; the full state must agree on where c is.
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
      const std::string full = effective_label(at_time(s, psi, traj.times[i]), traj.states[i], s.n_sigma);
      if (full != label) {
        throw Error(ErrorKind::StructureMismatch,
                    fmt::format("effective branch changed from '{}' to '{}' at t = {:.6g}", label, full,
                                traj.times[i]));
      }
      traj.branch_ids[i] = full;
    }
    c = traj.states.back();
    if (options.keep_trajectory) {
      if (!record.trajectory) record.trajectory = Trajectory{};
      auto& all = *record.trajectory;
      const std::size_t skip = all.times.empty() ? 0 : 1;
      all.times.insert(all.times.end(), traj.times.begin() + skip, traj.times.end());
      all.states.insert(all.states.end(), traj.states.begin() + skip, traj.states.end());
      all.branch_ids.insert(all.branch_ids.end(), traj.branch_ids.begin() + skip, traj.branch_ids.end());
    }
  }

  void run(const Configuration& c0) {
    record.initial = c0;
    WaveFunction psi = initial_wavefunction(s);
    Configuration c = c0;
    effective_branches(psi, c, s.n_sigma);
    double t = 0;
    for (const auto& e : s.events) {
      if (e.time > t) integrate(psi, c, t, e.time);
      const DeviceSpec& dev = s.device(e.device);
      const WaveFunction pre = at_time(s, psi, e.time);
      const BranchRewrite rw = build_rewrite(s, dev, e.time);
      WaveFunction post = apply(rw, pre);
      c = resolve_positions_after_event(pre, post, c, rw, s.n_sigma);
      const WaveFunction eff = effective_branches(post, c, s.n_sigma);
      EventRecord ev{e.time, e.device, {}, c, std::nullopt};
      const auto outcomes = outcome_packets(s, dev, e.time);
      if (!outcomes.empty()) ev.outcome = readout(dev.name, c, readout_dof(s, dev), outcomes, s.n_sigma).label;
      if (dev.kind == DeviceKind::Bellometer) {
        if (const auto kind = partner_bell(eff, slot_pair(dev))) ev.partner_bell = std::string(to_string(*kind));
      }
      record.events.push_back(std::move(ev));
      psi = std::move(post);
      t = e.time;
    }
    const double t_end = s.t_end.value_or(t);
    if (t_end > t) integrate(psi, c, t, t_end);
    record.final = c;

    // Recorded outcomes must still be readable from the final positions,
    // unless a later device moved the same dof.
    for (std::size_t i = 0; i < record.events.size(); ++i) {
      const auto& ev = record.events[i];
      if (ev.outcome.empty()) continue;
      const DeviceSpec& dev = s.device(ev.device);
      const std::size_t dof = readout_dof(s, dev);
      bool moved_later = false;
      for (std::size_t j = i + 1; j < record.events.size(); ++j) {
        const DeviceSpec& later = s.device(record.events[j].device);
        for (std::size_t k = 0; k < later.dofs.size(); ++k) moved_later = moved_later || dof_index(s, later, k) == dof;
      }
      if (moved_later) continue;
      auto outcomes = outcome_packets(s, dev, ev.time);
      if (s.evolution == Evolution::Free) {
        for (auto& o : outcomes) o.packet = free_evolve(o.packet, params, dof, std::max(t_end, ev.time));
      }
      const auto final_label = readout(dev.name, c, dof, outcomes, s.n_sigma).label;
      if (final_label != ev.outcome) {
        throw Error(ErrorKind::StructureMismatch,
                    fmt::format("{} read '{}' at t = {:.6g} but '{}' at the end", dev.name, ev.outcome, ev.time,
                                final_label));
      }
    }
  }
};

}  // namespace

RunRecord run_from(const ExchangeScenario& s, const Configuration& c0, std::uint64_t seed, const RunOptions& options) {
  Runner runner{s, options, s.params(), {}};
  runner.record.seed = seed;
  try {
    runner.run(c0);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("run seed {}: {}", seed, strip_kind(e)));
  }
  return std::move(runner.record);
}

RunRecord run_once(const ExchangeScenario& s, std::uint64_t seed, const RunOptions& options) {
  std::mt19937_64 rng(seed);
  Configuration c0;
  try {
    c0 = sample_configuration(initial_wavefunction(s), rng, s.n_sigma);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("run seed {}: {}", seed, strip_kind(e)));
  }
  return run_from(s, c0, seed, options);
}

// ---------------------------------------------------------------------------
// Ensembles

std::optional<double> JointTable::correlation() const {
  const double n = static_cast<double>(total());
  if (n == 0) return std::nullopt;
  // Spin a = +1, b = -1.
  const double m1 = (static_cast<double>(counts[0][0] + counts[0][1]) - static_cast<double>(counts[1][0] + counts[1][1])) / n;
  const double m2 = (static_cast<double>(counts[0][0] + counts[1][0]) - static_cast<double>(counts[0][1] + counts[1][1])) / n;
  const double e12 = (static_cast<double>(counts[0][0] + counts[1][1]) - static_cast<double>(counts[0][1] + counts[1][0])) / n;
  const double v1 = 1 - m1 * m1;
  const double v2 = 1 - m2 * m2;
  if (v1 <= 0 || v2 <= 0) return std::nullopt;
  return (e12 - m1 * m2) / std::sqrt(v1 * v2);
}

void JointTable::add(const JointTable& other) {
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) counts[i][j] += other.counts[i][j];
  }
}

double StatsReport::bell_frequency(const std::string& kind) const {
  const auto it = bell_counts.find(kind);
  return it == bell_counts.end() || n == 0 ? 0.0 : static_cast<double>(it->second) / static_cast<double>(n);
}

double StatsReport::radius(double p) const { return n == 0 ? 0.0 : stats::binomial_radius(p, n); }

StatsReport aggregate(const ExchangeScenario& s, const std::vector<RunRecord>& runs) {
  StatsReport r;
  r.n = runs.size();
  bool recombined = false;
  for (const auto& e : s.events) {
    const auto& d = s.device(e.device);
    if (d.kind == DeviceKind::Bellometer && r.bell_device.empty()) r.bell_device = d.name;
    if (d.kind == DeviceKind::Recombine) recombined = true;
    if (d.kind == DeviceKind::SternGerlach) {
      if (r.first_spin.empty()) {
        r.first_spin = d.name;
      } else if (r.second_spin.empty()) {
        r.second_spin = d.name;
      }
    }
  }
  if (!r.bell_device.empty()) {
    for (const char* k : kBellRoles) r.bell_counts[k] = 0;
  }
  const bool spins = !r.second_spin.empty();
  for (const auto& run : runs) {
    const std::string bell = r.bell_device.empty() ? std::string() : run.outcome(r.bell_device);
    if (!bell.empty()) ++r.bell_counts[bell];
    if (!spins) continue;
    const int s1 = run.outcome(r.first_spin) == "a" ? 0 : 1;
    const int s2 = run.outcome(r.second_spin) == "a" ? 0 : 1;
    ++r.joint.counts[s1][s2];
    if (bell.empty()) continue;
    ++r.joint_by_bell[bell].counts[s1][s2];
    if (recombined) continue;
    const bool anti = bell == "alpha" || bell == "beta";
    if (anti == (s1 == s2)) ++r.correlation_violations;
  }
  return r;
}

Ensemble run_ensemble(const ExchangeScenario& s, const RunOptions& options, unsigned threads) {
  validate(s);
  Ensemble out;
  out.runs.resize(s.runs);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(s.runs)));
  std::vector<std::exception_ptr> errors(threads);
  const auto work = [&](unsigned w) {
    try {
      for (std::size_t i = w; i < s.runs; i += threads) out.runs[i] = run_once(s, stats::run_seed(s.seed, i), options);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  out.stats = aggregate(s, out.runs);
  return out;
}

// ---------------------------------------------------------------------------
// Analyses

CorrelationTable full_state_correlation_check(const WaveFunction& psi) {
  if (psi.size() == 0) throw Error(ErrorKind::StructureMismatch, "empty wavefunction");
  const auto& slots = psi.branches().front().internal.slots();
  if (std::find(slots.begin(), slots.end(), 2) == slots.end() ||
      std::find(slots.begin(), slots.end(), 4) == slots.end()) {
    throw Error(ErrorKind::StructureMismatch, "state has no slots 2 and 4");
  }
  const std::array<int, 2> keep{2, 4};
  DensityMatrix rho = partial_trace(internal_density(psi), keep);
  const auto& m = rho.entries();
  CorrelationTable t{rho};
  const double aa = m(0, 0).real(), ab = m(1, 1).real(), ba = m(2, 2).real();
  t.p2_a = aa + ab;
  t.p4_a = aa + ba;
  if (t.p2_a > 0) {
    t.p4_a_given_2a = aa / t.p2_a;
    t.p4_b_given_2a = ab / t.p2_a;
  }
  return t;
}

WaveFunction wavefunction_after(const ExchangeScenario& s, std::size_t last_event) {
  if (last_event >= s.events.size()) throw Error(ErrorKind::InvalidArgument, "event index out of range");
  WaveFunction psi = initial_wavefunction(s);
  for (std::size_t i = 0; i <= last_event; ++i) {
    const auto& e = s.events[i];
    psi = apply(build_rewrite(s, s.device(e.device), e.time), at_time(s, psi, e.time));
  }
  return psi;
}

bool RecombinationReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

RecombinationReport recombination_check(const ExchangeScenario& s, std::optional<std::size_t> runs) {
  validate(s);
  std::optional<std::size_t> rec_index;
  std::vector<std::size_t> bell_events;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto kind = s.device(s.events[i].device).kind;
    if (kind == DeviceKind::Recombine && !rec_index) rec_index = i;
    if (kind == DeviceKind::Bellometer && !rec_index) bell_events.push_back(i);
  }
  if (!rec_index) throw Error(ErrorKind::StructureMismatch, "schedule has no recombine event");
  const DeviceSpec& rec = s.device(s.events[*rec_index].device);

  RecombinationReport report;
  const WaveFunction psi = wavefunction_after(s, *rec_index);

  report.checks.push_back({"single branch", psi.size() == 1, fmt::format("{} branch(es)", psi.size())});

  const WaveFunction start = initial_wavefunction(s);
  const InternalState& target = start.branches().front().internal;
  double fidelity = 0;
  for (const auto& b : psi.branches()) {
    fidelity = std::max(fidelity, std::abs(b.amplitude) * std::abs(inner_product(target, b.internal)));
  }
  report.overlap_with_target = fidelity;
  report.checks.push_back({"internal state restored", std::abs(fidelity - 1.0) < 1e-12,
                           fmt::format("|<initial|restored>| = {:.15f}", fidelity)});

  // Expected packets: initial ones, with bellometer particles in their dustbins
  // and the pointer back in its ready packet.
  std::vector<GaussianPacket> expected;
  for (const auto& name : s.initial_packets) expected.push_back(s.packet(name));
  for (auto i : bell_events) {
    const auto& d = s.device(s.events[i].device);
    expected[dof_index(s, d, 0)] = s.packet(role_packet(d, "dustbin_i"));
    expected[dof_index(s, d, 1)] = s.packet(role_packet(d, "dustbin_j"));
  }
  expected[dof_index(s, rec, 0)] = s.packet(role_packet(rec, "ready"));
  bool packets_ok = psi.size() == 1;
  if (packets_ok) {
    const auto& got = psi.branches().front().packets;
    for (std::size_t d = 0; d < expected.size(); ++d) packets_ok = packets_ok && got[d].same_shape(expected[d]);
  }
  report.checks.push_back({"packets restored", packets_ok, packets_ok ? "pointer ready, particles in place" : "differ"});

  const auto pair = slot_pair(rec);
  std::vector<int> rest;
  for (int slot : target.slots()) {
    if (slot != pair.first && slot != pair.second) rest.push_back(slot);
  }
  if (rest.size() == 2 && psi.size() == 1) {
    report.partner_pair = {rest[0], rest[1]};
    report.entangled_24 = pair_entangled(psi.branches().front().internal, rest[0], rest[1]);
    report.checks.push_back({fmt::format("({},{}) unentangled", rest[0], rest[1]), !report.entangled_24,
                             fmt::format("entangled = {}", report.entangled_24)});
  } else {
    report.checks.push_back({"partner pair unentangled", false, "state is not a four-slot single branch"});
  }

  ExchangeScenario ens = s;
  if (runs) ens.runs = *runs;
  const Ensemble e = run_ensemble(ens);
  if (e.stats.second_spin.empty()) {
    report.checks.push_back({"spin independence", false, "schedule has fewer than two spin measurements"});
    return report;
  }
  report.joint = e.stats.joint;
  const auto chi = stats::independence_2x2(report.joint.counts);
  report.chi_square = chi.statistic;
  report.p_value = chi.p_value;
  report.checks.push_back({"spin independence", chi.p_value > 0.01,
                           fmt::format("chi2 = {:.4f}, p = {:.4f}, n = {}", chi.statistic, chi.p_value, e.stats.n)});
  const double n = static_cast<double>(report.joint.total());
  const double p1 = static_cast<double>(report.joint.counts[0][0] + report.joint.counts[0][1]) / n;
  const double p2 = static_cast<double>(report.joint.counts[0][0] + report.joint.counts[1][0]) / n;
  const double r = stats::binomial_radius(0.5, report.joint.total());
  report.checks.push_back({"spin marginals 1/2", std::abs(p1 - 0.5) <= r && std::abs(p2 - 0.5) <= r,
                           fmt::format("P({}=a) = {:.4f}, P({}=a) = {:.4f}, radius {:.4f}", e.stats.first_spin, p1,
                                       e.stats.second_spin, p2, r)});
  return report;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const RunRecord& r, const DofRegistry& registry) {
  nlohmann::json events = nlohmann::json::array();
  nlohmann::json outcomes = nlohmann::json::object();
  for (const auto& e : r.events) {
    nlohmann::json ev = {{"t", e.time}, {"device", e.device}, {"positions", positions_json(e.positions, registry)}};
    ev["outcome"] = e.outcome.empty() ? nlohmann::json(nullptr) : nlohmann::json(e.outcome);
    if (e.partner_bell) ev["partner_bell"] = *e.partner_bell;
    events.push_back(std::move(ev));
    if (!e.outcome.empty()) outcomes[e.device] = e.outcome;
  }
  return {{"seed", r.seed},
          {"initial", positions_json(r.initial, registry)},
          {"final", positions_json(r.final, registry)},
          {"events", std::move(events)},
          {"outcomes", std::move(outcomes)}};
}

nlohmann::json to_json(const StatsReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["bell_device"] = r.bell_device;
  j["spin_devices"] = {r.first_spin, r.second_spin};
  nlohmann::json bell = nlohmann::json::object();
  for (const auto& [kind, count] : r.bell_counts) {
    const double f = r.bell_frequency(kind);
    nlohmann::json entry = {{"count", count}, {"frequency", f}, {"radius_3sigma", r.radius(0.25)}};
    if (const auto it = r.joint_by_bell.find(kind); it != r.joint_by_bell.end()) {
      const auto& t = it->second;
      entry["joint"] = table_json(t);
      const auto corr = t.correlation();
      entry["correlation"] = corr ? nlohmann::json(*corr) : nlohmann::json(nullptr);
      const double n = static_cast<double>(t.total());
      entry["p_first_a"] = n > 0 ? static_cast<double>(t.counts[0][0] + t.counts[0][1]) / n : 0.0;
      entry["radius_first_a"] = stats::binomial_radius(0.5, t.total());
    }
    bell[kind] = std::move(entry);
  }
  j["bell"] = std::move(bell);
  j["joint"] = table_json(r.joint);
  j["correlation_violations"] = r.correlation_violations;
  return j;
}

std::string render_text(const StatsReport& r) {
  std::string out = fmt::format("runs: {}\n", r.n);
  if (!r.bell_device.empty()) {
    out += fmt::format("\n{} outcome  count   freq     +-3sigma  ", r.bell_device);
    if (!r.second_spin.empty()) out += fmt::format("{0}/{1}: aa     ab     ba     bb     corr", r.first_spin, r.second_spin);
    out += '\n';
    for (const char* kind : kBellRoles) {
      const auto found = r.bell_counts.find(kind);
      if (found == r.bell_counts.end()) continue;
      const auto count = found->second;
      out += fmt::format("  {:<14} {:<7} {:.4f}   {:.4f}    ", kind, count, r.bell_frequency(kind), r.radius(0.25));
      if (const auto it = r.joint_by_bell.find(kind); it != r.joint_by_bell.end()) {
        const auto& c = it->second.counts;
        const auto corr = it->second.correlation();
        out += fmt::format("       {:<6} {:<6} {:<6} {:<6} {}", c[0][0], c[0][1], c[1][0], c[1][1],
                           corr ? fmt::format("{:+.3f}", *corr) : std::string("n/a"));
      }
      out += '\n';
    }
  }
  if (!r.second_spin.empty()) {
    const auto& c = r.joint.counts;
    out += fmt::format("\njoint {}/{}: aa {} ab {} ba {} bb {}\n", r.first_spin, r.second_spin, c[0][0], c[0][1],
                       c[1][0], c[1][1]);
    out += fmt::format("correlation violations: {}\n", r.correlation_violations);
  }
  return out;
}

nlohmann::json to_json(const RecombinationReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return {{"checks", std::move(checks)},
          {"partner_pair", {r.partner_pair.first, r.partner_pair.second}},
          {"entangled_partner_pair", r.entangled_24},
          {"overlap_with_initial", r.overlap_with_target},
          {"joint", table_json(r.joint)},
          {"chi_square", r.chi_square},
          {"p_value", r.p_value},
          {"passed", r.passed()}};
}

std::string render_text(const RecombinationReport& r) {
  std::string out;
  for (const auto& c : r.checks) out += fmt::format("{} {}: {}\n", c.pass ? "PASS" : "FAIL", c.name, c.detail);
  out += fmt::format("entangled({},{}): {}\n", r.partner_pair.first, r.partner_pair.second,
                     r.entangled_24 ? "true" : "false");
  return out;
}

}  // namespace pilotwave
