#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qspin {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitRuntime = 2, kExitCheckFailed = 3 };

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace qspin
