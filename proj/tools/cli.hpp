#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adpm::cli {

// Stable exit codes for scripting.
enum ExitCode : int {
    kOk = 0,
    kVerificationFailed = 1,
    kCapacity = 2,
    kInputFormat = 3,
    kInvalidParameter = 4,
    kArityMismatch = 5,
};

/// Run one command line (without the program name). Output that the commands
/// print goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adpm::cli
