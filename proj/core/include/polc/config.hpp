#pragma once

#include <map>
#include <string>

#include "polc/common.hpp"

namespace polc {

// flat key=value files ('#' comments, blank lines ignored)
std::map<std::string, std::string> parse_kv_file(const std::string& path);
void write_kv_file(const std::string& path, const std::map<std::string, std::string>& kv);

}  // namespace polc
