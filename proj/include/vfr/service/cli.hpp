#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vfr {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRejected = 3;

/// Runs one command line (args[0] is the program name). Results go to `out`;
/// failures go to `err` as a single JSON line {"error":{code,stage,message}}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vfr
