#include "doctest.h"

#include <cmath>

#include "fd_check.hpp"
#include "polc/nn.hpp"
#include "polc/ops.hpp"

using namespace polc;
namespace o = polc::ops;

namespace {

// Runs the finite-difference oracle against backward() for a graph builder
// that maps a set of leaves to a scalar.
void check_op(const std::function<Var()>& build, std::vector<Var> leaves, double tol = 1e-6) {
  Rng rng(7);
  for (auto& leaf : leaves) {
    auto forward = [&] { return build()->value[0]; };
    auto analytic = [&] {
      for (auto& l : leaves) l->drop_grad();
      backward(build());
      return leaf->grad_live ? leaf->grad : Tensor(leaf->value.shape());
    };
    auto rep = testing::fd_check(forward, analytic, leaf, 24, rng);
    CHECK(rep.checked > 0);
    CHECK(rep.max_rel_err < tol);
  }
}

Var leaf_rand(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  return make_leaf(Tensor::randn(std::move(shape), rng, scale), true);
}

}  // namespace

TEST_CASE("backward on composed scalar graph matches finite differences") {
  Rng rng(1);
  auto a = leaf_rand({3, 4}, rng);
  auto b = leaf_rand({3, 4}, rng);
  auto build = [&] {
    auto t = o::mul(o::add(a, b), o::tanh_(a));
    return o::mean(o::square(t));
  };
  check_op(build, {a, b});
}

TEST_CASE("elementwise op gradients") {
  Rng rng(2);
  auto x = leaf_rand({2, 5}, rng, 0.8);
  check_op([&] { return o::sum(o::exp_(x)); }, {x});
  check_op([&] { return o::sum(o::square(x)); }, {x});
  check_op([&] { return o::sum(o::sigmoid(x)); }, {x});
  check_op([&] { return o::sum(o::softplus(x)); }, {x});
  check_op([&] { return o::sum(o::gelu(x)); }, {x});
  check_op([&] { return o::sum(o::leaky_relu(x, 0.1)); }, {x});
  check_op([&] { return o::mean(o::mul_scalar(o::add_scalar(x, 0.3), -1.7)); }, {x});
  auto xp = make_leaf(Tensor::full({6}, 0.5), true);
  for (int i = 0; i < 6; ++i) xp->value[i] = 0.2 + 0.17 * i;
  check_op([&] { return o::sum(o::log_(xp)); }, {xp});
  check_op([&] { return o::sum(o::reciprocal(xp)); }, {xp});
}

TEST_CASE("clamp_min passes gradient only above the floor") {
  auto x = make_leaf(Tensor::from({2}, {2.0, -3.0}), true);
  auto y = o::sum(o::clamp_min(x, 0.5));
  backward(y);
  CHECK(x->grad[0] == 1.0);
  CHECK(x->grad[1] == 0.0);
}

TEST_CASE("sigmoid_clamped saturates outside the clip range") {
  auto x = make_leaf(Tensor::from({3}, {0.3, 20.0, -20.0}), true);
  auto y = o::sigmoid_clamped(x, 15.0);
  CHECK(y->value[1] < 1.0);
  CHECK(y->value[2] > 0.0);
  backward(o::sum(y));
  CHECK(x->grad[0] > 0.0);
  CHECK(x->grad[1] == 0.0);
  CHECK(x->grad[2] == 0.0);
}

TEST_CASE("mse and mean gradients") {
  Rng rng(3);
  auto a = leaf_rand({4, 3}, rng);
  auto b = leaf_rand({4, 3}, rng);
  check_op([&] { return o::mse(a, b); }, {a, b});
  check_op([&] { return o::mean(a); }, {a});
}

TEST_CASE("linear gradients") {
  Rng rng(4);
  auto x = leaf_rand({3, 5}, rng);
  auto w = leaf_rand({4, 5}, rng);
  auto b = leaf_rand({4}, rng);
  check_op([&] { return o::mean(o::square(o::linear(x, w, b))); }, {x, w, b});
}

TEST_CASE("conv2d gradients across strides and padding") {
  Rng rng(5);
  for (auto [stride, pad, k] : {std::tuple{1, 1, 3}, std::tuple{2, 1, 3}, std::tuple{4, 0, 4}, std::tuple{1, 0, 1}}) {
    auto x = leaf_rand({2, 3, 8, 8}, rng);
    auto w = leaf_rand({4, 3, k, k}, rng, 0.5);
    auto b = leaf_rand({4}, rng);
    check_op([&, s = stride, p = pad] { return o::mean(o::square(o::conv2d(x, w, b, s, p))); }, {x, w, b});
  }
}

TEST_CASE("tconv_rr gradients and shape") {
  Rng rng(6);
  auto x = leaf_rand({2, 3, 4, 4}, rng);
  auto w = leaf_rand({3, 5, 2, 2}, rng, 0.5);
  auto b = leaf_rand({5}, rng);
  auto y = o::tconv_rr(x, w, b, 2);
  CHECK(y->value.shape() == std::vector<int>{2, 5, 8, 8});
  check_op([&] { return o::mean(o::square(o::tconv_rr(x, w, b, 2))); }, {x, w, b});
}

TEST_CASE("pixel shuffle layout and bijection") {
  // 1x1 spatial input with channels [a,b,c,d] -> 2x2 block [[a,b],[c,d]]
  auto x = make_leaf(Tensor::from({1, 4, 1, 1}, {1.0, 2.0, 3.0, 4.0}), false);
  auto y = o::pixel_shuffle(x, 2);
  CHECK(y->value.shape() == std::vector<int>{1, 1, 2, 2});
  CHECK(y->value[0] == 1.0);
  CHECK(y->value[1] == 2.0);
  CHECK(y->value[2] == 3.0);
  CHECK(y->value[3] == 4.0);

  Rng rng(7);
  auto t = leaf_rand({2, 8, 3, 5}, rng);
  auto rt = o::pixel_unshuffle(o::pixel_shuffle(t, 2), 2);
  for (std::int64_t i = 0; i < t->value.size(); ++i) CHECK(rt->value[i] == t->value[i]);
  check_op([&] { return o::mean(o::square(o::pixel_shuffle(t, 2))); }, {t});
  auto u = leaf_rand({2, 3, 4, 6}, rng);
  check_op([&] { return o::mean(o::square(o::pixel_unshuffle(u, 2))); }, {u});
}

TEST_CASE("spatial op gradients") {
  Rng rng(8);
  auto x = leaf_rand({2, 3, 4, 4}, rng);
  check_op([&] { return o::mean(o::square(o::nearest_upsample(x, 3))); }, {x});
  check_op([&] { return o::mean(o::square(o::avg_pool_global(x))); }, {x});
  check_op([&] { return o::mean(o::square(o::max_pool2(x))); }, {x});
  check_op([&] { return o::mean(o::square(o::bilinear_upsample(x, 7, 9))); }, {x});
  check_op([&] { return o::mean(o::square(o::site_normalize(x, 1e-10))); }, {x});
  auto v = leaf_rand({2, 3}, rng);
  check_op([&] { return o::mean(o::square(o::broadcast_spatial(v, 5, 6))); }, {v});
}

TEST_CASE("channel ops and gather_column gradients") {
  Rng rng(9);
  auto x = leaf_rand({2, 4, 3, 3}, rng);
  auto w = leaf_rand({4}, rng);
  auto b = leaf_rand({4}, rng);
  check_op([&] { return o::mean(o::square(o::channel_scale(x, w))); }, {x, w});
  check_op([&] { return o::mean(o::square(o::channel_affine(x, w, b))); }, {x, w, b});
  auto m = leaf_rand({4, 6}, rng);
  check_op([&] { return o::sum(o::square(o::gather_column(m, 2))); }, {m});
}

TEST_CASE("concat and slice gradients") {
  Rng rng(10);
  auto a = leaf_rand({2, 2, 3, 3}, rng);
  auto b = leaf_rand({2, 5, 3, 3}, rng);
  check_op([&] { return o::mean(o::square(o::concat_channels({a, b}))); }, {a, b});
  check_op([&] { return o::mean(o::square(o::slice_channels(b, 1, 4))); }, {b});
}

TEST_CASE("cross entropy gradients") {
  Rng rng(11);
  auto logits = leaf_rand({4, 6}, rng);
  std::vector<int> labels{0, 5, 2, 2};
  check_op([&] { return o::cross_entropy_cls(logits, labels); }, {logits});

  auto seg = leaf_rand({2, 3, 4, 4}, rng);
  std::vector<int> seglab(2 * 4 * 4, 1);
  seglab[0] = 255;
  seglab[5] = 2;
  seglab[17] = 0;
  check_op([&] { return o::cross_entropy_seg(seg, seglab, 255); }, {seg});
}

TEST_CASE("cross entropy analytic values") {
  // uniform logits over K classes -> ln K
  auto logits = make_leaf(Tensor::zeros({2, 7}), false);
  auto l = o::cross_entropy_cls(logits, {0, 3});
  CHECK(l->value[0] == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  // all-ignored segmentation batch is an error
  auto seg = make_leaf(Tensor::zeros({1, 3, 2, 2}), false);
  std::vector<int> ign(4, 255);
  CHECK_THROWS_AS((void)o::cross_entropy_seg(seg, ign, 255), SpecError);
}

TEST_CASE("detach blocks gradient flow") {
  Rng rng(12);
  auto x = leaf_rand({3}, rng);
  auto y = o::sum(o::mul(detach(x), x));
  backward(y);
  // d/dx (c * x) = c with c the detached copy of x
  for (int i = 0; i < 3; ++i) CHECK(x->grad[i] == doctest::Approx(x->value[i]));
}

TEST_CASE("frozen leaves receive no gradient and no graph traversal") {
  Rng rng(13);
  auto x = leaf_rand({3}, rng);
  auto w = leaf_rand({3}, rng);
  w->requires_grad = false;
  auto y = o::sum(o::mul(w, o::square(x)));
  backward(y);
  CHECK(x->grad_live);
  CHECK(!w->grad_live);
}

TEST_CASE("backward accumulates across calls and zero_grads clears") {
  Rng rng(14);
  auto x = leaf_rand({2}, rng);
  auto build = [&] { return o::sum(o::square(x)); };
  backward(build());
  Tensor g1 = x->grad;
  backward(build());
  CHECK(x->grad[0] == doctest::Approx(2 * g1[0]));
  nn::ParamList ps{{"x", x}};
  nn::zero_grads(ps);
  CHECK(!x->grad_live);
}

TEST_CASE("adam applies updates and serializes state") {
  Rng rng(15);
  auto x = make_leaf(Tensor::full({2}, 5.0), true);
  nn::ParamList ps{{"x", x}};
  nn::Adam opt(ps);
  for (int i = 0; i < 50; ++i) {
    nn::zero_grads(ps);
    backward(o::mse(x, make_leaf(Tensor::zeros({2}))));
    opt.step(0.5);
  }
  CHECK(std::fabs(x->value[0]) < 5.0);
  std::map<std::string, Tensor> st;
  opt.save_state(st, "opt");
  CHECK(st.count("opt.m.x") == 1);
  CHECK(st.count("opt.t") == 1);
  nn::Adam opt2(ps);
  opt2.load_state(st, "opt");
  CHECK(opt2.t() == opt.t());
}

TEST_CASE("resblock keeps identity when weights are zero") {
  Rng rng(16);
  nn::ResBlock rb(3, nn::Act::relu, rng);
  for (auto* v : {&rb.c1.w, &rb.c1.b, &rb.c2.w, &rb.c2.b})
    for (std::int64_t i = 0; i < (*v)->value.size(); ++i) (*v)->value[i] = 0.0;
  auto x = leaf_rand({1, 3, 5, 5}, rng);
  auto y = rb.forward(x);
  for (std::int64_t i = 0; i < x->value.size(); ++i) CHECK(y->value[i] == x->value[i]);
}
