#include "polc/bitstream.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace polc {

std::vector<std::uint32_t> quantize_pmf(const std::vector<double>& p) {
  const int ns = static_cast<int>(p.size());
  std::vector<std::uint32_t> f(p.size());
  std::int64_t sum = 0;
  for (int s = 0; s < ns; ++s) {
    auto v = static_cast<std::uint32_t>(std::llround(p[static_cast<std::size_t>(s)] * kCdfTotal));
    if (v < 1) v = 1;
    f[static_cast<std::size_t>(s)] = v;
    sum += v;
  }
  // deterministic rebalancing to hit exactly 2^16: shave the largest counts,
  // grow the most probable symbols
  while (sum > static_cast<std::int64_t>(kCdfTotal)) {
    int best = -1;
    std::uint32_t bf = 1;
    for (int s = 0; s < ns; ++s)
      if (f[static_cast<std::size_t>(s)] > bf) {
        bf = f[static_cast<std::size_t>(s)];
        best = s;
      }
    POLC_CHECK(best >= 0, "cdf rebalance failed");
    --f[static_cast<std::size_t>(best)];
    --sum;
  }
  while (sum < static_cast<std::int64_t>(kCdfTotal)) {
    int best = 0;
    double bp = -1;
    for (int s = 0; s < ns; ++s)
      if (p[static_cast<std::size_t>(s)] > bp) {
        bp = p[static_cast<std::size_t>(s)];
        best = s;
      }
    ++f[static_cast<std::size_t>(best)];
    ++sum;
  }
  return f;
}

CdfTable build_cdf_tables(const Codec& codec, int rate_index) {
  (void)rate_point(rate_index);
  const int c = codec.config().latent_channels;
  CdfTable table;
  const int ns = table.num_symbols();

  // Evaluate interval masses for every (channel, symbol) in one batched pass,
  // plus the two open tails which are folded into the edge symbols.
  Tensor grid({1, c, ns, 1});
  for (int ch = 0; ch < c; ++ch)
    for (int s = 0; s < ns; ++s) grid.at({0, ch, s, 0}) = table.symbol_min + s;
  Var mass = codec.likelihood(make_leaf(grid), rate_index);

  Tensor bounds({1, c, 2, 1});
  for (int ch = 0; ch < c; ++ch) {
    bounds.at({0, ch, 0, 0}) = table.symbol_min;  // lower tail: cdf((min-1/2)/g)
    bounds.at({0, ch, 1, 0}) = table.symbol_max;
  }
  Var lo_b = codec.entropy().cdf(
      ops::channel_scale(ops::add_scalar(make_leaf(bounds), -0.5), codec.prior_inv_gain(rate_index)));
  Var hi_b = codec.entropy().cdf(
      ops::channel_scale(ops::add_scalar(make_leaf(bounds), 0.5), codec.prior_inv_gain(rate_index)));

  table.cum.assign(static_cast<std::size_t>(c), {});
  for (int ch = 0; ch < c; ++ch) {
    const double tail_lo = lo_b->value.at({0, ch, 0, 0});
    const double tail_hi = 1.0 - hi_b->value.at({0, ch, 1, 0});
    POLC_CHECK_T(tail_lo + tail_hi < 0.25, SpecError,
                 "entropy mass concentrates outside the symbol range; widen [-127,128]");
    std::vector<double> p(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) p[static_cast<std::size_t>(s)] = mass->value.at({0, ch, s, 0});
    p.front() += tail_lo;
    p.back() += tail_hi;

    std::vector<std::uint32_t> f = quantize_pmf(p);
    auto& cum = table.cum[static_cast<std::size_t>(ch)];
    cum.assign(static_cast<std::size_t>(ns) + 1, 0);
    for (int s = 0; s < ns; ++s) cum[static_cast<std::size_t>(s) + 1] = cum[static_cast<std::size_t>(s)] + f[static_cast<std::size_t>(s)];
    POLC_CHECK(cum.back() == kCdfTotal, "cdf normalization failed");
  }
  return table;
}

std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols, const CdfTable& table,
                                    const std::vector<int>& channels) {
  POLC_CHECK(symbols.size() == channels.size(), "rc_encode: symbols/channels size mismatch");
  // validate everything before emitting a single byte
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    POLC_CHECK_T(symbols[i] >= table.symbol_min && symbols[i] <= table.symbol_max, SpecError,
                 "rc_encode: symbol out of range");
    POLC_CHECK_T(channels[i] >= 0 && channels[i] < table.channels(), SpecError, "rc_encode: bad channel id");
  }
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const auto& cum = table.cum[static_cast<std::size_t>(channels[i])];
    const int k = symbols[i] - table.symbol_min;
    enc.encode(cum[static_cast<std::size_t>(k)], cum[static_cast<std::size_t>(k) + 1] - cum[static_cast<std::size_t>(k)]);
  }
  return enc.finish();
}

std::vector<int> rc_decode(const std::vector<std::uint8_t>& payload, const CdfTable& table,
                           const std::vector<int>& channels, std::size_t n) {
  POLC_CHECK(channels.size() == n, "rc_decode: channel ids must cover n symbols");
  RangeDecoder dec(payload.data(), payload.size());
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& cum = table.cum[static_cast<std::size_t>(channels[i])];
    const std::uint32_t target = dec.decode_target();
    // binary search: greatest k with cum[k] <= target
    int lo = 0, hi = table.num_symbols();
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (cum[static_cast<std::size_t>(mid)] <= target)
        lo = mid;
      else
        hi = mid;
    }
    dec.consume(cum[static_cast<std::size_t>(lo)], cum[static_cast<std::size_t>(lo) + 1] - cum[static_cast<std::size_t>(lo)]);
    out[i] = table.symbol_min + lo;
  }
  return out;
}

namespace {
void put_u16_be(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}
void put_u32_be(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}
}  // namespace

std::vector<std::uint8_t> Bitstream::serialize() const {
  POLC_CHECK_T(height > 0 && height <= 0xFFFF && width > 0 && width <= 0xFFFF, SpecError,
               "bitstream dims must fit uint16");
  std::vector<std::uint8_t> b;
  b.reserve(15 + payload.size());
  b.push_back('P');
  b.push_back('O');
  b.push_back('L');
  b.push_back('C');
  b.push_back(version);
  put_u16_be(b, static_cast<std::uint16_t>(height));
  put_u16_be(b, static_cast<std::uint16_t>(width));
  b.push_back(static_cast<std::uint8_t>(rate_index));
  b.push_back(static_cast<std::uint8_t>(model_id));
  put_u32_be(b, static_cast<std::uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

Bitstream Bitstream::parse(const std::vector<std::uint8_t>& bytes) {
  POLC_CHECK_T(bytes.size() >= 15, FormatError, "bitstream too short");
  POLC_CHECK_T(bytes[0] == 'P' && bytes[1] == 'O' && bytes[2] == 'L' && bytes[3] == 'C', FormatError,
               "bad magic (not a .polc stream)");
  Bitstream bs;
  bs.version = bytes[4];
  POLC_CHECK_T(bs.version == 1, FormatError, "unsupported bitstream version");
  bs.height = (bytes[5] << 8) | bytes[6];
  bs.width = (bytes[7] << 8) | bytes[8];
  bs.rate_index = bytes[9];
  bs.model_id = bytes[10];
  const std::uint32_t plen = (static_cast<std::uint32_t>(bytes[11]) << 24) | (static_cast<std::uint32_t>(bytes[12]) << 16) |
                             (static_cast<std::uint32_t>(bytes[13]) << 8) | bytes[14];
  POLC_CHECK_T(bytes.size() == 15 + plen, FormatError, "payload length mismatch (corrupt stream)");
  bs.payload.assign(bytes.begin() + 15, bytes.end());
  return bs;
}

void Bitstream::save(const std::string& path) const {
  auto b = serialize();
  std::ofstream os(path, std::ios::binary);
  POLC_CHECK_T(os.good(), IoError, "cannot write " + path);
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  POLC_CHECK_T(os.good(), IoError, "write failed: " + path);
}

Bitstream Bitstream::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  POLC_CHECK_T(is.good(), IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

Bitstream write_stream(const LatentCode& z, int image_h, int image_w, int model_id, const Codec& codec) {
  POLC_CHECK_T(z.quantized, SpecError, "write_stream: latent must be round-quantized");
  POLC_CHECK_T(z.channels() == codec.config().latent_channels, IncompatError, "write_stream: channel mismatch");
  POLC_CHECK_T(z.h() == (image_h + kLatentDivisor - 1) / kLatentDivisor &&
                   z.w() == (image_w + kLatentDivisor - 1) / kLatentDivisor,
               IncompatError, "write_stream: latent/image shape mismatch");
  CdfTable table = build_cdf_tables(codec, z.rate_index);
  const std::int64_t n = z.values.size();
  std::vector<int> symbols(static_cast<std::size_t>(n));
  std::vector<int> channels(static_cast<std::size_t>(n));
  const std::int64_t plane = static_cast<std::int64_t>(z.h()) * z.w();
  std::int64_t clamped = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    int s = static_cast<int>(z.values[i]);
    if (s < table.symbol_min) {
      s = table.symbol_min;
      ++clamped;
    } else if (s > table.symbol_max) {
      s = table.symbol_max;
      ++clamped;
    }
    symbols[static_cast<std::size_t>(i)] = s;
    channels[static_cast<std::size_t>(i)] = static_cast<int>(i / plane);
  }
  if (clamped > 0)
    std::fprintf(stderr, "[polc] warning: clamped %lld latent values to the coded symbol range\n",
                 static_cast<long long>(clamped));
  Bitstream bs;
  bs.height = image_h;
  bs.width = image_w;
  bs.rate_index = z.rate_index;
  bs.model_id = model_id;
  bs.payload = rc_encode(symbols, table, channels);
  return bs;
}

LatentCode read_stream(const Bitstream& bs, const Codec& codec) {
  // header carries the original image dims; the coded latent covers the
  // padded (next multiple of 16) canvas
  (void)rate_point(bs.rate_index);
  const int c = codec.config().latent_channels;
  const int h = (bs.height + kLatentDivisor - 1) / kLatentDivisor;
  const int w = (bs.width + kLatentDivisor - 1) / kLatentDivisor;
  CdfTable table = build_cdf_tables(codec, bs.rate_index);
  const std::int64_t n = static_cast<std::int64_t>(c) * h * w;
  std::vector<int> channels(static_cast<std::size_t>(n));
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (std::int64_t i = 0; i < n; ++i) channels[static_cast<std::size_t>(i)] = static_cast<int>(i / plane);
  std::vector<int> symbols = rc_decode(bs.payload, table, channels, static_cast<std::size_t>(n));
  LatentCode z;
  z.values = Tensor({c, h, w});
  for (std::int64_t i = 0; i < n; ++i) z.values[i] = symbols[static_cast<std::size_t>(i)];
  z.rate_index = bs.rate_index;
  z.quantized = true;
  return z;
}

}  // namespace polc
