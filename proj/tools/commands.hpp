#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pstnet::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kIo = 3,
  kNumeric = 4,
};

/// Parses `args` (args[0] is the program name), runs the subcommand and maps
/// library errors onto exit codes. Messages go to `out` and `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pstnet::cli
