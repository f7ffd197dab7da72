#pragma once

#include <string>
#include <vector>

namespace semb::cli {

// Entry point of the `semb` tool; returns the process exit status.
int run(int argc, const char* const* argv);
// Same, for in-process drivers: args exclude the program name.
int run(const std::vector<std::string>& args);

}  // namespace semb::cli
