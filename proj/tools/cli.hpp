#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mgembed::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kDataError = 3,
  kNumerical = 4,
};

// Runs one `mgembed` invocation. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mgembed::cli
