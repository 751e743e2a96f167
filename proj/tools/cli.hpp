#pragma once

// Command-line front end. `run` is the whole program minus process exit so
// tests can drive it in-process.

#include <ostream>
#include <string>
#include <vector>

namespace plume::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit status: 0 on success, 1 on runtime failure, 2 on usage errors. Errors
// are reported as a single line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace plume::cli
