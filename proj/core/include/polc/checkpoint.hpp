#pragma once

#include <map>
#include <string>

#include "polc/tensor.hpp"

namespace polc {

// Named-tensor container with string metadata. The binary layout is fixed
// (little-endian, raw IEEE754 doubles) so save -> load -> save is
// byte-identical.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor> tensors;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

}  // namespace polc
