#include <benchmark/benchmark.h>

#include "polc/ops.hpp"

using namespace polc;

static void ConvForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(1);
  Var x = make_leaf(Tensor::randn({4, c, 32, 32}, rng));
  Var w = make_leaf(Tensor::randn({c, c, 3, 3}, rng, 0.1));
  Var b = make_leaf(Tensor::zeros({c}));
  for (auto _ : state) {
    Var y = ops::conv2d(x, w, b, 1, 1);
    benchmark::DoNotOptimize(y->value.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * 9 * c * c * 4 * 32 * 32);
}
BENCHMARK(ConvForward)->Arg(16)->Arg(48);

static void ConvBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  Rng rng(2);
  Var x = make_leaf(Tensor::randn({4, c, 32, 32}, rng), true);
  Var w = make_leaf(Tensor::randn({c, c, 3, 3}, rng, 0.1), true);
  Var b = make_leaf(Tensor::zeros({c}), true);
  for (auto _ : state) {
    x->drop_grad();
    w->drop_grad();
    b->drop_grad();
    backward(ops::mean(ops::square(ops::conv2d(x, w, b, 1, 1))));
    benchmark::DoNotOptimize(w->grad.data());
  }
  state.SetItemsProcessed(state.iterations() * 6LL * 9 * c * c * 4 * 32 * 32);
}
BENCHMARK(ConvBackward)->Arg(16)->Arg(48);
