#pragma once

#include <string>
#include <vector>

namespace lfsep {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // I/O, solver or verification failure
inline constexpr int kExitUsage = 2;    // bad flags, unknown subcommand or invalid manifest

/// Runs one `lfsep` subcommand; args[0] is the program name. Diagnostics and
/// progress go to standard error.
int run_command(const std::vector<std::string>& args);
int run_command(int argc, const char* const* argv);

}  // namespace lfsep
