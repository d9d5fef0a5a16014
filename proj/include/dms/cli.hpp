#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dms {

/// Exit statuses of run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime error or failed theory check
inline constexpr int kExitUsage = 2;    // bad subcommand, flag or config

/// Runs one subcommand (`args` excludes the program name). Human-readable
/// progress goes to `out`, diagnostics and usage text to `err`.
///
/// Settings are resolved lowest to highest: built-in defaults, the DMS_SEED
/// environment variable, the --config file, then individual flags.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dms
