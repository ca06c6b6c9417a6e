#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace s5::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Errors are reported
/// on `err` as a single JSON line; usage problems also print the help text.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace s5::cli
