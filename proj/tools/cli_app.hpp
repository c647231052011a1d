#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace maskpipe::cli {

/// Runs one command line (without the program name) and returns the exit
/// code: 0 success, 1 validation or usage error, 2 I/O or format error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Every command path, e.g. "" for the top level, "dataset stats".
std::vector<std::string> command_paths();

std::string help_text(const std::string& path);

}  // namespace maskpipe::cli
