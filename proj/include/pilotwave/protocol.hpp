#pragma once

// Entanglement-exchange scenario: a schedule of device events applied to a
// branch-decomposed wavefunction with Bohmian trajectories in between.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pilotwave/devices.hpp"
#include "pilotwave/guidance.hpp"

namespace pilotwave {

enum class DeviceKind { Bellometer, SternGerlach, Recombine };

std::string_view to_string(DeviceKind kind);

/// Device declaration by name. Packet roles:
///   bellometer: ready, alpha, beta, gamma, delta, dustbin_i, dustbin_j
///   stern_gerlach: a, b and optionally ready
///   recombine: ready, alpha, beta, gamma, delta
struct DeviceSpec {
  std::string name;
  DeviceKind kind = DeviceKind::SternGerlach;
  std::vector<int> slots;
  std::vector<std::string> dofs;  ///< bellometer: particle i, particle j, pointer
  std::map<std::string, std::string> packets;
};

struct EventSpec {
  double time = 0;
  std::string device;
};

enum class Evolution { Frozen, Free };

struct ExchangeScenario {
  double hbar = 1.0;
  std::vector<Dof> dofs;
  std::map<std::string, GaussianPacket> packets;
  std::string initial_state = "alpha(1,2)*alpha(3,4)";
  std::vector<std::string> initial_packets;  ///< packet name per dof
  std::vector<DeviceSpec> devices;
  std::vector<EventSpec> events;  ///< strictly increasing times
  std::size_t runs = 1000;
  std::uint64_t seed = 0;
  double n_sigma = 5.0;
  std::optional<double> dt;
  std::optional<double> t_end;  ///< defaults to the last event time
  Evolution evolution = Evolution::Frozen;

  DofRegistry registry() const;
  PhysicalParams params() const { return registry().physical_params(hbar); }
  const DeviceSpec& device(const std::string& name) const;
  const GaussianPacket& packet(const std::string& name) const;
};

/// Built-in geometries used when no configuration file is given.
ExchangeScenario default_exchange_scenario();
ExchangeScenario moving_exchange_scenario();
ExchangeScenario default_recombination_scenario();

/// Checks packet references, slot and dof ranges, device disjointness and
/// event ordering. Throws Error with the offending device or event named.
void validate(const ExchangeScenario& s);

/// The single-branch starting wavefunction: internal state times the initial packets.
WaveFunction initial_wavefunction(const ExchangeScenario& s);

/// Rewrite for `device` with its output packets born at time t.
BranchRewrite build_rewrite(const ExchangeScenario& s, const DeviceSpec& device, double t);

/// Outcome packets used to read the device, born at time t (empty for recombine).
std::vector<OutcomePacket> outcome_packets(const ExchangeScenario& s, const DeviceSpec& device, double t);

/// Index of the dof a device is read from.
std::size_t readout_dof(const ExchangeScenario& s, const DeviceSpec& device);

struct EventRecord {
  double time = 0;
  std::string device;
  std::string outcome;  ///< empty for devices without a readout
  Configuration positions;
  /// Bell kind of the slots left out of a bellometer measurement, when pure.
  std::optional<std::string> partner_bell;
};

struct RunRecord {
  std::uint64_t seed = 0;
  Configuration initial;
  Configuration final;
  std::vector<EventRecord> events;
  std::optional<Trajectory> trajectory;

  /// Outcome recorded for `device`, or empty.
  std::string outcome(const std::string& device) const;
};

struct RunOptions {
  bool keep_trajectory = false;
  std::optional<double> dt;  ///< overrides the scenario step
};

/// One seeded run: sample the initial configuration, integrate between
/// events, apply each device, re-place moved dofs and read the outcome.
/// Errors carry the run seed.
RunRecord run_once(const ExchangeScenario& s, std::uint64_t seed, const RunOptions& options = {});

/// Same run from a given initial configuration.
RunRecord run_from(const ExchangeScenario& s, const Configuration& c0, std::uint64_t seed,
                   const RunOptions& options = {});

struct JointTable {
  std::uint64_t counts[2][2] = {{0, 0}, {0, 0}};  ///< [first spin][second spin], a = 0

  std::uint64_t total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
  /// Pearson correlation of the +-1 spin values; nullopt when a marginal is constant.
  std::optional<double> correlation() const;
  void add(const JointTable& other);
};

struct StatsReport {
  std::size_t n = 0;
  std::string bell_device;
  std::string first_spin;
  std::string second_spin;
  std::map<std::string, std::uint64_t> bell_counts;  ///< by Bell kind name
  std::map<std::string, JointTable> joint_by_bell;
  JointTable joint;
  std::uint64_t correlation_violations = 0;

  double bell_frequency(const std::string& kind) const;
  double radius(double p) const;
};

/// Exchange scenarios pick the first bellometer and the first two
/// Stern-Gerlach devices of the schedule.
StatsReport aggregate(const ExchangeScenario& s, const std::vector<RunRecord>& runs);

struct Ensemble {
  std::vector<RunRecord> runs;
  StatsReport stats;
};

/// Runs i = 0..N-1 with seeds stats::run_seed(s.seed, i); results are in
/// run order regardless of `threads`.
Ensemble run_ensemble(const ExchangeScenario& s, const RunOptions& options = {}, unsigned threads = 1);

struct CorrelationTable {
  DensityMatrix rho_24;
  double p4_a = 0;
  double p4_a_given_2a = 0;
  double p4_b_given_2a = 0;
  double p2_a = 0;
};

/// Spin statistics of slots 2 and 4 from the full state, tracing spatial
/// dofs and the other internal slots.
CorrelationTable full_state_correlation_check(const WaveFunction& psi);

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RecombinationReport {
  std::vector<CheckLine> checks;
  std::pair<int, int> partner_pair{2, 4};
  bool entangled_24 = true;
  double overlap_with_target = 0;
  JointTable joint;
  double chi_square = 0;
  double p_value = 0;

  bool passed() const;
};

/// Applies the schedule up to the recombine event at the wavefunction level,
/// compares with the restored product state, then runs the ensemble through
/// the remaining spin measurements and tests their independence.
RecombinationReport recombination_check(const ExchangeScenario& s, std::optional<std::size_t> runs = std::nullopt);

/// The wavefunction after every event up to and including `last_event`
/// (without trajectories).
WaveFunction wavefunction_after(const ExchangeScenario& s, std::size_t last_event);

nlohmann::json to_json(const RunRecord& r, const DofRegistry& registry);
nlohmann::json to_json(const StatsReport& r);
std::string render_text(const StatsReport& r);
nlohmann::json to_json(const RecombinationReport& r);
std::string render_text(const RecombinationReport& r);

}  // namespace pilotwave
