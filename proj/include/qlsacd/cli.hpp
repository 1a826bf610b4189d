#pragma once

#include <ostream>

namespace qlsacd::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kNumericalError = 3, kInternalError = 4 };

// Entry point of the qlsacd command-line tool; `out` and `err` stand in for stdout and stderr.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qlsacd::cli
