#include "doctest.h"

#include <cmath>
#include <cstdio>

#include "polc/bitstream.hpp"

using namespace polc;

namespace {
Codec small_codec(std::uint64_t seed = 11) {
  Rng rng(seed);
  return Codec({.latent_channels = 8, .base_width = 6, .num_rate_points = 8}, rng);
}

// entropy of a symbol sequence under the quantized table, in bits
double table_bits(const std::vector<int>& syms, const CdfTable& t, const std::vector<int>& chan) {
  double bits = 0;
  for (std::size_t i = 0; i < syms.size(); ++i) bits += -std::log2(t.freq(chan[i], syms[i]) / 65536.0);
  return bits;
}

std::vector<std::uint32_t> cum_from_pmf(const std::vector<double>& p) {
  auto f = quantize_pmf(p);
  std::vector<std::uint32_t> cum(p.size() + 1, 0);
  for (std::size_t s = 0; s < p.size(); ++s) cum[s + 1] = cum[s] + f[s];
  return cum;
}
}  // namespace

TEST_CASE("quantize_pmf: uniform mass over 256 symbols gives frequency 256 each") {
  std::vector<double> p(256, 1.0 / 256.0);
  auto f = quantize_pmf(p);
  for (auto v : f) CHECK(v == 256u);
}

TEST_CASE("quantize_pmf always sums to 65536 with no zero frequency") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> p(256);
    double s = 0;
    for (auto& v : p) s += v = std::exp(rng.uniform(-12.0, 0.0));
    for (auto& v : p) v /= s;
    auto f = quantize_pmf(p);
    std::uint64_t total = 0;
    for (auto v : f) {
      CHECK(v >= 1u);
      total += v;
    }
    CHECK(total == 65536u);
  }
}

TEST_CASE("cdf tables are strictly increasing and model-faithful") {
  Codec c = small_codec();
  for (int idx : {0, 4, 7}) {
    CdfTable t = build_cdf_tables(c, idx);
    CHECK(t.channels() == 8);
    for (int ch = 0; ch < t.channels(); ++ch) {
      const auto& cum = t.cum[static_cast<std::size_t>(ch)];
      CHECK(cum.front() == 0u);
      CHECK(cum.back() == 65536u);
      for (std::size_t k = 1; k < cum.size(); ++k) CHECK(cum[k] > cum[k - 1]);
    }
    // Quantization faithfulness. The freq>=1 floor hands floored/2^16 of mass
    // to dead symbols, which lower-bounds the divergence for sharp channels;
    // the quantizer must add less than 1e-3 bits/symbol beyond that, and for
    // spread distributions (no floored symbols) stay below 1e-3 outright.
    const int ns = t.num_symbols();
    LatentCode grid;
    grid.values = Tensor({8, ns, 1});
    for (int ch = 0; ch < 8; ++ch)
      for (int s = 0; s < ns; ++s) grid.values.at({ch, s, 0}) = t.symbol_min + s;
    grid.rate_index = idx;
    grid.quantized = true;
    Tensor p = c.likelihoods(grid);
    for (int ch = 0; ch < 8; ++ch) {
      double kl = 0;
      int floored = 0;
      for (int s = 0; s < ns; ++s) {
        const double pt = p.at({ch, s, 0});
        const double q = t.freq(ch, t.symbol_min + s) / 65536.0;
        if (t.freq(ch, t.symbol_min + s) == 1) ++floored;
        if (pt > 1e-12) kl += pt * std::log2(pt / q);
      }
      const double floor_theft = floored / 65536.0 / std::log(2.0);
      CHECK(kl < floor_theft + 1e-3);
      if (floored == 0) CHECK(kl < 1e-3);
    }
  }
}

TEST_CASE("widen-range error when mass concentrates outside the symbol range") {
  // a gain this large pushes the bulk of the distribution past +-128
  Rng rng(3);
  Codec c({.latent_channels = 2, .base_width = 4, .num_rate_points = 8}, rng);
  Checkpoint ck;
  c.save_into(ck);
  Tensor lg = ck.get("codec.gains.log_gain");
  for (std::int64_t i = 0; i < lg.size(); ++i) lg[i] = std::log(5000.0);
  ck.tensors["codec.gains.log_gain"] = lg;
  Codec wide = Codec::load_from(ck);
  CHECK_THROWS_AS(build_cdf_tables(wide, 0), SpecError);
}

TEST_CASE("range coder: empty sequence round-trips in at most 8 bytes") {
  Codec c = small_codec();
  CdfTable t = build_cdf_tables(c, 3);
  auto payload = rc_encode({}, t, {});
  CHECK(payload.size() <= 8);
  auto back = rc_decode(payload, t, {}, 0);
  CHECK(back.empty());
}

TEST_CASE("range coder: 10000 uniform-random symbols round-trip exactly") {
  Codec c = small_codec();
  CdfTable t = build_cdf_tables(c, 5);
  Rng rng(99);
  std::vector<int> syms(10000), chan(10000);
  for (std::size_t i = 0; i < syms.size(); ++i) {
    chan[i] = static_cast<int>(rng.uniform_int(8));
    syms[i] = t.symbol_min + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(t.num_symbols())));
  }
  auto payload = rc_encode(syms, t, chan);
  auto back = rc_decode(payload, t, chan, syms.size());
  REQUIRE(back.size() == syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) CHECK(back[i] == syms[i]);
  // payload obeys the cross-entropy bound with 8 bytes slack
  CHECK(payload.size() <= static_cast<std::size_t>(std::ceil(table_bits(syms, t, chan) / 8.0)) + 8);
}

TEST_CASE("range coder: skewed and adversarial tables round-trip") {
  CdfTable t;
  t.cum.resize(2);
  const int ns = t.num_symbols();
  {
    std::vector<double> p(static_cast<std::size_t>(ns), 0.0);
    p[static_cast<std::size_t>(0 - t.symbol_min)] = 1.0;  // near-deterministic channel
    t.cum[0] = cum_from_pmf(p);
  }
  {
    std::vector<double> p(static_cast<std::size_t>(ns), 0.0);
    p[static_cast<std::size_t>(-3 - t.symbol_min)] = 0.5;
    p[static_cast<std::size_t>(7 - t.symbol_min)] = 0.5;
    t.cum[1] = cum_from_pmf(p);
  }

  // 1000 copies of the mode cost well under 100 bytes
  std::vector<int> syms(1000, 0), chan(1000, 0);
  auto payload = rc_encode(syms, t, chan);
  CHECK(payload.size() < 100);
  CHECK(rc_decode(payload, t, chan, 1000) == syms);

  // mixed channels, including the rarest symbols
  Rng rng(7);
  std::vector<int> s2, c2;
  for (int i = 0; i < 4000; ++i) {
    int ch = static_cast<int>(rng.uniform_int(2));
    c2.push_back(ch);
    if (ch == 0)
      s2.push_back(rng.uniform() < 0.995 ? 0 : t.symbol_min + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ns))));
    else
      s2.push_back(rng.uniform() < 0.5 ? -3 : 7);
  }
  auto pl2 = rc_encode(s2, t, c2);
  CHECK(rc_decode(pl2, t, c2, s2.size()) == s2);
}

TEST_CASE("rc_encode validates symbols before any byte is produced") {
  Codec c = small_codec();
  CdfTable t = build_cdf_tables(c, 0);
  CHECK_THROWS_AS(rc_encode({4000}, t, {0}), SpecError);
  CHECK_THROWS_AS(rc_encode({0}, t, {99}), SpecError);
}

TEST_CASE("truncated payload raises a decode error") {
  Codec c = small_codec();
  CdfTable t = build_cdf_tables(c, 2);
  Rng rng(13);
  std::vector<int> syms(500), chan(500);
  for (std::size_t i = 0; i < syms.size(); ++i) {
    chan[i] = static_cast<int>(rng.uniform_int(8));
    syms[i] = static_cast<int>(rng.uniform_int(21)) - 10;
  }
  auto payload = rc_encode(syms, t, chan);
  payload.resize(payload.size() / 2);
  CHECK_THROWS_AS(rc_decode(payload, t, chan, syms.size()), FormatError);
}

TEST_CASE("container header matches the conformance vector") {
  Bitstream bs;
  bs.height = 64;
  bs.width = 64;
  bs.rate_index = 3;
  bs.model_id = 0;
  bs.payload = {0xAA, 0xBB};
  auto bytes = bs.serialize();
  const std::uint8_t want[11] = {0x50, 0x4F, 0x4C, 0x43, 0x01, 0x00, 0x40, 0x00, 0x40, 0x03, 0x00};
  REQUIRE(bytes.size() == 15 + 2);
  for (int i = 0; i < 11; ++i) CHECK(bytes[static_cast<std::size_t>(i)] == want[i]);
  // payload_len as u32 big-endian
  CHECK(bytes[11] == 0x00);
  CHECK(bytes[12] == 0x00);
  CHECK(bytes[13] == 0x00);
  CHECK(bytes[14] == 0x02);

  Bitstream back = Bitstream::parse(bytes);
  CHECK(back.height == 64);
  CHECK(back.width == 64);
  CHECK(back.rate_index == 3);
  CHECK(back.model_id == 0);
  CHECK(back.payload == bs.payload);
}

TEST_CASE("container rejects bad magic, bad version and length mismatch") {
  Bitstream bs;
  bs.height = 32;
  bs.width = 48;
  bs.payload = {1, 2, 3};
  auto bytes = bs.serialize();
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(Bitstream::parse(bad), FormatError);
  bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(Bitstream::parse(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(Bitstream::parse(bad), FormatError);
}

TEST_CASE("write_stream/read_stream round-trip random latents at every rate point") {
  Codec c = small_codec(42);
  Rng rng(1234);
  for (int rep = 0; rep < 16; ++rep) {
    const int idx = rep % 8;
    const int h = 1 + static_cast<int>(rng.uniform_int(4));
    const int w = 1 + static_cast<int>(rng.uniform_int(4));
    LatentCode z;
    z.values = Tensor({8, h, w});
    for (std::int64_t i = 0; i < z.values.size(); ++i)
      z.values[i] = static_cast<double>(static_cast<int>(rng.uniform_int(41)) - 20);
    z.rate_index = idx;
    z.quantized = true;
    Bitstream bs = write_stream(z, h * 16, w * 16, 2, c);
    CHECK(bs.rate_index == idx);
    CHECK(bs.model_id == 2);
    LatentCode back = read_stream(bs, c);
    CHECK(back.rate_index == idx);
    CHECK(back.quantized);
    REQUIRE(back.values.shape() == z.values.shape());
    for (std::int64_t i = 0; i < z.values.size(); ++i) CHECK(back.values[i] == z.values[i]);
  }
}

TEST_CASE("write_stream requires a quantized latent and clamps out-of-range") {
  Codec c = small_codec();
  LatentCode z;
  z.values = Tensor::zeros({8, 2, 2});
  z.rate_index = 1;
  z.quantized = false;
  CHECK_THROWS_AS(write_stream(z, 32, 32, 0, c), SpecError);
  z.quantized = true;
  z.values.at({0, 0, 0}) = 500.0;  // clamped with a warning, still decodable
  Bitstream bs = write_stream(z, 32, 32, 0, c);
  LatentCode back = read_stream(bs, c);
  CHECK(back.values.at({0, 0, 0}) == 128.0);
}

TEST_CASE(".polc file save/load round-trip") {
  Codec c = small_codec();
  LatentCode z;
  z.values = Tensor::zeros({8, 3, 2});
  for (std::int64_t i = 0; i < z.values.size(); ++i) z.values[i] = static_cast<double>((i % 7) - 3);
  z.rate_index = 6;
  z.quantized = true;
  Bitstream bs = write_stream(z, 48, 32, 1, c);
  const char* path = "/tmp/polc_test_stream.polc";
  bs.save(path);
  Bitstream in = Bitstream::load(path);
  LatentCode back = read_stream(in, c);
  for (std::int64_t i = 0; i < z.values.size(); ++i) CHECK(back.values[i] == z.values[i]);
  std::remove(path);
}
