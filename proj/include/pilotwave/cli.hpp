#pragma once

// Command-line front end: run, bell-expand, equivariance, recombine.
// Exit codes: 0 success, 1 run failure, 2 usage or configuration error.

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace pilotwave::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// `args` includes the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// A path to an existing file, or a bundled configuration name such as
/// `exchange_default` looked up in $PILOTWAVE_CONFIG_DIR, the installed
/// configs directory and ./configs.
std::filesystem::path resolve_config(const std::string& name_or_path);

}  // namespace pilotwave::cli
