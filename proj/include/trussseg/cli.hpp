#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trussseg {

/// Exit codes of `run_cli`.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Runs one command line (`args[0]` is the program name). Output goes to
/// `out`, diagnostics to `err`. Environment: TRUSSSEG_SEED, TRUSSSEG_JOBS.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace trussseg
