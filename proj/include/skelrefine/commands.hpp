#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace skelrefine::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 1,      // bad arguments, config or missing prerequisite
    kDataError = 2,  // unreadable or malformed data
    kNumerical = 3,  // training divergence or degenerate numerics
};

/// Runs the command line (args excludes the program name). Reports go to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int exit_code_for(const std::exception& e);

}  // namespace skelrefine::cli
