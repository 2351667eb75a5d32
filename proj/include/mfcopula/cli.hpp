#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mfcopula/config.hpp"

namespace mfcopula {

// Runs one CLI invocation. Errors are reported on `err` as a single JSON
// line {"error": kind, "message": text}; the return value is the exit
// status (0 success, 2 usage, 1 anything else).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env);
int run_cli(int argc, char** argv);

}  // namespace mfcopula
