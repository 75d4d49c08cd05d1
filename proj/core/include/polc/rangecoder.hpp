#pragma once

#include <cstdint>
#include <vector>

#include "polc/common.hpp"

namespace polc {

// Carry-aware byte-oriented range coder (LZMA lineage). Probabilities are
// 16-bit cumulative frequencies summing to 1<<16. The encoder and decoder
// renormalize on the same schedule, so the decoder consumes exactly the bytes
// the encoder produced (5-byte flush included).
class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();
  std::vector<std::uint8_t> out_;
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t size);
  // cumulative value of the next symbol, in [0, 1<<16)
  std::uint32_t decode_target() const;
  void consume(std::uint32_t cum, std::uint32_t freq);
  std::size_t consumed() const { return static_cast<std::size_t>(p_ - begin_); }

 private:
  std::uint8_t read();
  const std::uint8_t* begin_;
  const std::uint8_t* p_;
  const std::uint8_t* end_;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace polc
