#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace disrep {

inline constexpr const char* kCodeVersion = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

/// Runs one invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace disrep
