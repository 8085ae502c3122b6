#pragma once

#include <ostream>
#include <span>
#include <string>

namespace genad::cli {

enum ExitCode : int {
  kOk = 0,
  kNumericFailure = 1,
  kBadArguments = 2,
  kDataError = 3,
};

/// Runs the `genad` command line. `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace genad::cli
