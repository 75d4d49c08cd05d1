#include "polc/rangecoder.hpp"

namespace polc {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
constexpr int kProbBits = 16;
}  // namespace

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq) {
  POLC_CHECK(freq >= 1 && cum + freq <= (1u << kProbBits), "range encode: bad frequency interval");
  const std::uint32_t r = range_ >> kProbBits;
  low_ += static_cast<std::uint64_t>(cum) * r;
  range_ = freq * r;
  while (range_ < kTop) {
    shift_low();
    range_ <<= 8;
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
    for (; cache_size_ > 1; --cache_size_) out_.push_back(static_cast<std::uint8_t>(0xFF + carry));
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  } else {
    ++cache_size_;
  }
  low_ = (low_ & 0x00FFFFFFull) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t size)
    : begin_(data), p_(data), end_(data + size) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | read();
}

std::uint8_t RangeDecoder::read() {
  POLC_CHECK_T(p_ != end_, FormatError, "range payload truncated");
  return *p_++;
}

std::uint32_t RangeDecoder::decode_target() const {
  const std::uint32_t r = range_ >> kProbBits;
  std::uint32_t t = code_ / r;
  const std::uint32_t maxv = (1u << kProbBits) - 1;
  return t > maxv ? maxv : t;
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
  const std::uint32_t r = range_ >> kProbBits;
  code_ -= cum * r;
  range_ = freq * r;
  while (range_ < kTop) {
    code_ = (code_ << 8) | read();
    range_ <<= 8;
  }
}

}  // namespace polc
