#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ftap::cli {

/// Exit codes: 0 affirmative verdict, 2 negative verdict, 1 error.
inline constexpr int kOk = 0;
inline constexpr int kError = 1;
inline constexpr int kNegative = 2;

/// Parses `args` (without the program name), runs the verb and writes the
/// report to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ftap::cli
