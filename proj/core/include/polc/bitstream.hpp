#pragma once

#include <string>
#include <vector>

#include "polc/codec.hpp"
#include "polc/rangecoder.hpp"

namespace polc {

inline constexpr int kSymbolMin = -127;
inline constexpr int kSymbolMax = 128;
inline constexpr std::uint32_t kCdfTotal = 1u << 16;

// Per-channel 16-bit cumulative frequency tables over [symbol_min, symbol_max].
// Every symbol keeps frequency >= 1 and each channel sums to exactly 2^16.
struct CdfTable {
  int symbol_min = kSymbolMin;
  int symbol_max = kSymbolMax;
  std::vector<std::vector<std::uint32_t>> cum;  // (C) x (num_symbols+1), cum[0]=0, back()=2^16

  int num_symbols() const { return symbol_max - symbol_min + 1; }
  int channels() const { return static_cast<int>(cum.size()); }
  std::uint32_t freq(int channel, int symbol) const {
    const auto& c = cum[static_cast<std::size_t>(channel)];
    const int k = symbol - symbol_min;
    return c[static_cast<std::size_t>(k + 1)] - c[static_cast<std::size_t>(k)];
  }
};

// Quantizes one probability mass vector to integer frequencies >= 1 summing
// to exactly 2^16 (deterministic rebalancing).
std::vector<std::uint32_t> quantize_pmf(const std::vector<double>& p);

// Discretizes the entropy model at one rate point. Throws if the model piles
// too much mass outside the symbol range (the range would have to be widened).
CdfTable build_cdf_tables(const Codec& codec, int rate_index);

// Raw symbol coding. `channels` gives the table row per symbol; symbols must be
// in range (validated before any byte is produced).
std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols, const CdfTable& table,
                                    const std::vector<int>& channels);
std::vector<int> rc_decode(const std::vector<std::uint8_t>& payload, const CdfTable& table,
                           const std::vector<int>& channels, std::size_t n);

// Versioned container. Header: "POLC" | version u8 | height u16 BE |
// width u16 BE | rate_index u8 | model_id u8 | payload_len u32 BE | payload.
struct Bitstream {
  std::uint8_t version = 1;
  int height = 0;
  int width = 0;
  int rate_index = 0;
  int model_id = 0;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> serialize() const;
  static Bitstream parse(const std::vector<std::uint8_t>& bytes);
  void save(const std::string& path) const;
  static Bitstream load(const std::string& path);
};

// Serializes a quantized latent. Out-of-range values are clamped with a
// warning on stderr (training keeps latents in range in practice).
Bitstream write_stream(const LatentCode& z, int image_h, int image_w, int model_id, const Codec& codec);

// Exact inverse of write_stream for in-range latents.
LatentCode read_stream(const Bitstream& bs, const Codec& codec);

}  // namespace polc
