#pragma once

#include <string>
#include <vector>

namespace polc::cli {

// Exit codes: 0 success, 1 runtime failure, 2 bad input/paths/usage,
// 3 incompatibility (header/checkpoint mismatches).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace polc::cli
