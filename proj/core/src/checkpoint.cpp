#include "polc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace polc {

namespace {

constexpr char kMagic[8] = {'P', 'O', 'L', 'C', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  POLC_CHECK_T(is.good(), FormatError, "checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
  std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  POLC_CHECK_T(is.good(), FormatError, "checkpoint truncated");
  return s;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  POLC_CHECK_T(os.good(), IoError, "cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(os, k);
    put_str(os, v);
  }
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_str(os, name);
    put_u32(os, static_cast<std::uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put_u32(os, static_cast<std::uint32_t>(t.dim(i)));
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
  }
  POLC_CHECK_T(os.good(), IoError, "write failed: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  POLC_CHECK_T(is.good(), IoError, "cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  POLC_CHECK_T(is.good() && std::memcmp(magic, kMagic, 8) == 0, FormatError, "bad checkpoint magic: " + path);
  std::uint32_t ver = get_u32(is);
  POLC_CHECK_T(ver == kVersion, FormatError, "unsupported checkpoint version");
  Checkpoint ck;
  const std::uint32_t nmeta = get_u32(is);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = get_str(is);
    ck.meta[k] = get_str(is);
  }
  const std::uint32_t nt = get_u32(is);
  for (std::uint32_t i = 0; i < nt; ++i) {
    std::string name = get_str(is);
    const std::uint32_t nd = get_u32(is);
    std::vector<int> shape(nd);
    for (auto& d : shape) d = static_cast<int>(get_u32(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
    POLC_CHECK_T(is.good(), FormatError, "checkpoint truncated in tensor " + name);
    ck.tensors[name] = std::move(t);
  }
  return ck;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  auto it = tensors.find(name);
  POLC_CHECK_T(it != tensors.end(), IncompatError, "checkpoint missing tensor: " + name);
  return it->second;
}

}  // namespace polc
