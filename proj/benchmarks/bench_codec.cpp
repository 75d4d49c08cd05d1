#include <benchmark/benchmark.h>

#include "polc/codec.hpp"

using namespace polc;

static void EncodeImage(benchmark::State& state) {
  Rng rng(4);
  Codec codec({.latent_channels = static_cast<int>(state.range(0)),
               .base_width = static_cast<int>(state.range(1)),
               .num_rate_points = 8},
              rng);
  ImageBuffer img(64, 64);
  Rng ir(5);
  for (std::int64_t i = 0; i < img.pix.size(); ++i) img.pix[i] = ir.uniform();
  for (auto _ : state) {
    LatentCode z = codec.encode(img, rate_point(3));
    benchmark::DoNotOptimize(z.values.data());
  }
}
BENCHMARK(EncodeImage)->Args({16, 12})->Args({64, 48});

static void DecodeLatent(benchmark::State& state) {
  Rng rng(6);
  Codec codec({.latent_channels = static_cast<int>(state.range(0)),
               .base_width = static_cast<int>(state.range(1)),
               .num_rate_points = 8},
              rng);
  LatentCode z;
  z.values = Tensor::randn({static_cast<int>(state.range(0)), 4, 4}, rng);
  z.values = ops::t_round(z.values);
  z.rate_index = 3;
  z.quantized = true;
  for (auto _ : state) {
    ImageBuffer x = codec.decode(z, rate_point(3));
    benchmark::DoNotOptimize(x.pix.data());
  }
}
BENCHMARK(DecodeLatent)->Args({16, 12})->Args({64, 48});
