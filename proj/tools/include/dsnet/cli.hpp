#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dsnet::cli {

enum ExitCode : int { kSuccess = 0, kIoFailure = 1, kConfigFailure = 2, kNumericFailure = 3 };

// Runs one dsnet command. `args` excludes the program name. Normal output goes
// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsnet::cli
