#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowinfer {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumerical = 2, kExitIo = 3 };

/// Runs the `flowinfer` command line; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "2..9", "2,4,7" or a mix such as "0..3,8".
std::vector<int> parse_components(const std::string& text);

}  // namespace flowinfer
