#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cfset::cli {

enum ExitCode { kClean = 0, kViolation = 1, kUsage = 2, kInternal = 3 };

// Runs one command line (argv[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads CFSET_LOG (trace, debug, info, warn, error, off).
void init_logging();

}  // namespace cfset::cli
