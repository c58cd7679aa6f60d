#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace csfuse::app {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kNumericError = 4 };

/// Entry point behind the csfuse binary. `args` excludes the program name.
/// Never throws; errors become a message on `err` and a nonzero exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csfuse::app
