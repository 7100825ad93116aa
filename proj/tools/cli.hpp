#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace milpath::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code; diagnostics go to `err` as "error: ...".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace milpath::cli
