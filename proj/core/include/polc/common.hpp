#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace polc {

// Error taxonomy, mapped to CLI exit codes: runtime 1, bad input 2, incompatibility 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {  // malformed files / bitstreams
  using Error::Error;
};
struct SpecError : Error {  // invalid configuration or arguments
  using Error::Error;
};
struct IncompatError : Error {  // mismatched checkpoints / headers / shapes
  using Error::Error;
};
struct DivergenceError : Error {  // non-finite training loss
  using Error::Error;
};

#define POLC_CHECK(cond, msg)                                     \
  do {                                                            \
    if (!(cond)) throw ::polc::Error(std::string("check failed: ") + (msg)); \
  } while (0)

#define POLC_CHECK_T(cond, err_type, msg)            \
  do {                                               \
    if (!(cond)) throw err_type(msg);                \
  } while (0)

// FNV-1a over raw bytes; used for frozen-parameter-group auditing.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace polc
