#include "polc/config.hpp"

#include <fstream>

namespace polc {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream is(path);
  POLC_CHECK_T(is.good(), IoError, "cannot open config: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    POLC_CHECK_T(eq != std::string::npos, FormatError, "bad config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void write_kv_file(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ofstream os(path);
  POLC_CHECK_T(os.good(), IoError, "cannot write config: " + path);
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

}  // namespace polc
