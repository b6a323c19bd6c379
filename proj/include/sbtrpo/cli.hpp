#pragma once

#include <string>
#include <vector>

namespace sbtrpo {

/// Command-line front end. Subcommands: run, sweep, diagnose, oracle.
/// Exit codes: 0 success, 1 runtime failure, 2 infeasible/diagnostic,
/// 3 config error.
int cli_main(const std::vector<std::string>& args);

} // namespace sbtrpo
