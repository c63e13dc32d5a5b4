#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "decoupler/json.hpp"

namespace decoupler {

enum ExitCode { kExitPass = 0, kExitFail = 1, kExitUsage = 2, kExitRuntime = 3 };

/// Runs one command line. Reports go to out, JSON error objects to err.
int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a of the canonical config dump, as 16 hex digits.
std::string configHash(const Json& config);

}  // namespace decoupler
