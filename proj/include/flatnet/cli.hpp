#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flatnet {

// Entry point of the `flatnet` tool. args excludes the program name.
// Returns the process exit code: 0 ok, 1 usage, 2 data, 3 numerical.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Flat key=value config file as command-line tokens ("--key=value").
// Blank lines and lines starting with '#' are ignored.
std::vector<std::string> config_tokens(const std::string& path);

}  // namespace flatnet
