#pragma once

#include <ostream>

namespace groc::cli {

enum ExitCode : int { ok = 0, failure = 1, usage = 2, data = 3, numerical = 4 };

// Runs the command line; returns the process exit code. Diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace groc::cli
