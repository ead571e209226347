#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spiked::cli {

/// Runs the command line with the given arguments (argv[0] included).
/// Returns the process exit code: 0 success, 1 usage error, 2 input or
/// validation error, 3 internal numerical error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spiked::cli
