#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mnmt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCorrupt = 3;

/// Runs one subcommand. `args[0]` is the program name. Results go to `out`
/// (or files named by flags); logs and errors go to `err`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mnmt
