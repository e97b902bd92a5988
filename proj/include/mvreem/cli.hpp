#pragma once

#include <iosfwd>

namespace mvreem {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitArgument = 2, kExitData = 3, kExitFit = 4 };

/// Entry point of the `mvreem` tool with subcommands fit, predict,
/// simulate and report. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mvreem
