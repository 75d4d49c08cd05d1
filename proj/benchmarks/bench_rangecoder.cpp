#include <benchmark/benchmark.h>

#include "polc/bitstream.hpp"

using namespace polc;

namespace {
CdfTable make_table() {
  CdfTable t;
  t.cum.resize(1);
  std::vector<double> p(static_cast<std::size_t>(t.num_symbols()));
  for (int s = 0; s < t.num_symbols(); ++s) {
    const double x = (t.symbol_min + s) / 6.0;
    p[static_cast<std::size_t>(s)] = std::exp(-0.5 * x * x);
  }
  double sum = 0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  auto f = quantize_pmf(p);
  auto& cum = t.cum[0];
  cum.assign(p.size() + 1, 0);
  for (std::size_t s = 0; s < p.size(); ++s) cum[s + 1] = cum[s] + f[s];
  return t;
}
}  // namespace

static void RangeRoundTrip(benchmark::State& state) {
  CdfTable t = make_table();
  Rng rng(3);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::vector<int> syms(n), chan(n, 0);
  for (auto& s : syms) s = static_cast<int>(rng.uniform_int(25)) - 12;
  for (auto _ : state) {
    auto payload = rc_encode(syms, t, chan);
    auto back = rc_decode(payload, t, chan, n);
    benchmark::DoNotOptimize(back.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(RangeRoundTrip)->Arg(1024)->Arg(16384);
