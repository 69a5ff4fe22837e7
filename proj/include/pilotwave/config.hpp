#pragma once

// Scenario configuration files.
//
// Text form: `[section]` headers and `key = value` lines, `#` comments.
//
//   [physics]   hbar, n_sigma, evolution = frozen | free
//   [run]       runs, seed, dt, t_end
//   [dofs]      <id> = particle|pointer [mass]
//   [packets]   <name> = center sigma [wavenumber [phase]]
//   [initial]   state = <state expression>; <dof id> = <packet>
//   [devices]   <name> = bellometer slots=i,j dofs=xi,xj pointer=<dof> ready=<p>
//                          alpha=<p> beta=<p> gamma=<p> delta=<p> dustbins=<p>,<p>
//               <name> = stern_gerlach slot=k dof=<dof> a=<p> b=<p> [ready=<p>]
//               <name> = recombine slots=i,j pointer=<dof> ready=<p> alpha=.. delta=<p>
//   [events]    <time> = <device>
//   [output]    dir = <path>
//
// A document starting with '{' is read as JSON with the same sections as
// objects; values are strings, numbers or arrays (joined with spaces).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pilotwave/error.hpp"
#include "pilotwave/protocol.hpp"

namespace pilotwave {

struct ConfigDiagnostic {
  std::size_t line = 0;  ///< 1-based; 0 when not tied to a line
  std::size_t column = 0;
  std::string message;
};

class ConfigError : public Error {
 public:
  ConfigError(ErrorKind kind, std::vector<ConfigDiagnostic> diagnostics);

  const std::vector<ConfigDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<ConfigDiagnostic> diagnostics_;
};

struct ScenarioConfig {
  ExchangeScenario scenario;
  std::optional<std::string> output_dir;
  std::string text;  ///< source as read, used for the manifest hash
};

/// Throws ConfigError: kind Parse for syntax, InvalidArgument for semantics.
ScenarioConfig parse_config(std::string_view text);

ScenarioConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a of the raw bytes.
std::uint64_t config_hash(std::string_view text);

}  // namespace pilotwave
