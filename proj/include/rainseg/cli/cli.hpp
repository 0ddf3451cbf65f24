#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rainseg {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitVerification = 1, kExitUsage = 2, kExitDiverged = 3 };

/// Runs one command line (args excludes the program name): synth, quantize,
/// split, train, eval, predict or gradcheck. Errors are reported on `err` and
/// mapped to an ExitCode; nothing is thrown.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rainseg
