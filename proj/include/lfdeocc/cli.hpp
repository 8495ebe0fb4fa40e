#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lfdeocc {

/// Runs the command-line front end. args excludes the program name.
/// Returns 0 on success, 1 on a runtime failure, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "lo:hi:n" into n evenly spaced values from lo to hi inclusive
/// (n = 1 gives lo). Throws std::invalid_argument on malformed input.
std::vector<double> parse_sweep(const std::string& text);

}  // namespace lfdeocc
