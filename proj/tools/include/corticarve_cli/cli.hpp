#pragma once

#include <string>
#include <vector>

namespace corticarve::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

/// Parses and runs one command line (argv[0] is the program name).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace corticarve::cli
