#include "doctest.h"

#include <cmath>

#include "fd_check.hpp"
#include "polc/codec.hpp"
#include "polc/objectives.hpp"
#include "polc/datasets.hpp"

using namespace polc;
namespace o = polc::ops;
namespace obj = polc::objectives;

namespace {

struct Fixture {
  Codec codec;
  obj::Discriminator disc;
  vision::VisionModel net;  // tiny backbone for perceptual distance
  Fixture()
      : codec(make_codec()), disc(make_disc()), net(make_net()) {}
  static Codec make_codec() {
    Rng rng(31);
    return Codec({.latent_channels = 4, .base_width = 4, .num_rate_points = 8}, rng);
  }
  static obj::Discriminator make_disc() {
    Rng rng(32);
    return obj::Discriminator(4, 6, rng);
  }
  static vision::VisionModel make_net() {
    Rng rng(33);
    return vision::VisionModel({vision::Family::conv_stem, {4, 8, 12}, 1, 16, 10, 1}, rng);
  }
};

Var rand_image(int n, int hw, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  Tensor t({n, 3, hw, hw});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
  return make_leaf(t, grad);
}

Var rand_latent(int n, int c, int hw, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({n, c, hw, hw});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return make_leaf(t, false);
}

// finite-difference pass over a sample of coordinates of every trainable leaf
void fd_all_params(const std::function<Var()>& build, nn::ParamList& leaves, int coords_per_leaf = 8,
                   double tol = 1e-4) {
  Rng rng(77);
  for (auto& p : leaves) {
    if (!p.v->requires_grad) continue;
    auto forward = [&] { return build()->value[0]; };
    auto analytic = [&] {
      nn::zero_grads(leaves);
      backward(build());
      return p.v->grad_live ? p.v->grad : Tensor(p.v->value.shape());
    };
    auto rep = testing::fd_check(forward, analytic, p.v, coords_per_leaf, rng);
    CHECK_MESSAGE(rep.max_rel_err < tol, p.name, " rel err ", rep.max_rel_err);
  }
}

}  // namespace

TEST_CASE("analytic fixtures: a 1/2-everywhere discriminator") {
  Fixture f;
  // zero the output head -> logits 0 -> probability exactly 1/2 per patch
  auto ps = f.disc.params();
  for (auto& p : ps)
    if (p.name.rfind("disc.c4", 0) == 0)
      for (std::int64_t i = 0; i < p.v->value.size(); ++i) p.v->value[i] = 0.0;
  Var z = rand_latent(2, 4, 2, 1);
  Var x = rand_image(2, 32, 2);
  Var xf = rand_image(2, 32, 3);
  Var ld = obj::disc_loss(f.disc, z, xf, z, x);
  CHECK(std::fabs(ld->value[0] - 2.0 * std::log(2.0)) < 1e-6);
  Var lg = obj::gen_loss(f.disc, z, xf);
  CHECK(std::fabs(lg->value[0] - std::log(2.0)) < 1e-6);
}

TEST_CASE("analytic limits: confident discriminator drives the losses to zero") {
  // formula-level check with the clamped probability extremes
  const double p_hi = 1.0 / (1.0 + std::exp(-15.0));
  const double p_lo = 1.0 / (1.0 + std::exp(15.0));
  const double ld_limit = -std::log(1.0 - p_lo) - std::log(p_hi);
  CHECK(ld_limit > 0.0);
  CHECK(ld_limit < 1e-5);
  const double lg_limit = -std::log(p_hi);
  CHECK(lg_limit > 0.0);
  CHECK(lg_limit < 1e-5);
}

TEST_CASE("disc_loss gradient matches finite differences and touches only D") {
  Fixture f;
  Var z = rand_latent(2, 4, 2, 11);
  Var xf = rand_image(2, 32, 12);
  Var xr = rand_image(2, 32, 13);
  auto build = [&] { return obj::disc_loss(f.disc, z, xf, z, xr); };
  CHECK(build()->value[0] > 0.0);
  auto dps = f.disc.params();
  fd_all_params(build, dps, 6);
  // detached inputs leave coder parameters untouched
  auto cps = f.codec.all_params();
  nn::zero_grads(cps);
  backward(build());
  CHECK(nn::grads_all_zero(cps));
}

TEST_CASE("gen_loss gradient reaches the coder but a frozen D gets exactly none") {
  Fixture f;
  Var x = rand_image(2, 32, 21);
  Var y = f.codec.analysis(x);
  Var zt = f.codec.apply_gain(y, 3);
  Var xh = f.codec.synthesis(f.codec.apply_inv_gain(zt, 3));
  auto dps = f.disc.params();
  nn::set_trainable(dps, false);
  Var lg = obj::gen_loss(f.disc, zt, xh);
  auto cps = f.codec.all_params();
  nn::zero_grads(cps);
  nn::zero_grads(dps);
  backward(lg);
  for (auto& p : dps) CHECK(!p.v->grad_live);  // exactly zero gradient on D
  bool any = false;
  for (auto& p : cps)
    if (p.v->grad_live)
      for (std::int64_t i = 0; i < p.v->grad.size(); ++i) any = any || p.v->grad[i] != 0.0;
  CHECK(any);
  nn::set_trainable(dps, true);
}

TEST_CASE("perc_distance: zero at identity, symmetric, positive otherwise") {
  Fixture f;
  Var x = rand_image(1, 32, 31);
  Var same = make_leaf(x->value);
  CHECK(obj::perc_distance(x, same, f.net)->value[0] == doctest::Approx(0.0).epsilon(1e-12));
  Var y = rand_image(1, 32, 32);
  const double ab = obj::perc_distance(x, y, f.net)->value[0];
  const double ba = obj::perc_distance(y, x, f.net)->value[0];
  CHECK(ab > 0.0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  Tensor bad({1, 3, 16, 16});
  CHECK_THROWS_AS(obj::perc_distance(x, make_leaf(bad), f.net), SpecError);
}

TEST_CASE("perceptual distance punishes blur more than matched-MSE noise") {
  // train the backbone briefly on the shape corpus so its features carry
  // structure, then compare the two distortions at equal pixel MSE
  Rng rng(41);
  vision::VisionModel net({vision::Family::conv_stem, {8, 16, 24}, 1, 16, 10, 1}, rng);
  auto samples = data::synth_shapes(160, "cls", 99);
  auto params = net.all_params();
  nn::Adam opt(params);
  Rng drng(42);
  for (int step = 0; step < 150; ++step) {
    std::vector<ImageBuffer> imgs;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
      const auto& s = samples[drng.uniform_int(samples.size())];
      imgs.push_back(s.image);
      labels.push_back(s.label);
    }
    auto out = net.forward_full(make_leaf(stack_images(imgs)));
    nn::zero_grads(params);
    backward(ops::cross_entropy_cls(out.pred, labels));
    opt.step(1e-3);
  }

  int wins = 0, total = 0;
  for (int t = 0; t < 6; ++t) {
    const ImageBuffer& img = samples[static_cast<std::size_t>(t * 13)].image;
    const int hw = img.height();
    // 5x5 box blur
    Tensor blur({3, hw, hw});
    const std::int64_t plane = static_cast<std::int64_t>(hw) * hw;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < hw; ++y)
        for (int x = 0; x < hw; ++x) {
          double acc = 0;
          int cnt = 0;
          for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= hw || xx < 0 || xx >= hw) continue;
              acc += img.pix[c * plane + static_cast<std::int64_t>(yy) * hw + xx];
              ++cnt;
            }
          blur[c * plane + static_cast<std::int64_t>(y) * hw + x] = acc / cnt;
        }
    const double mse_blur = ops::t_mse(img.pix, blur);
    // noise scaled to the same pixel MSE
    Rng nrng(1000 + static_cast<std::uint64_t>(t));
    Tensor noisy({3, hw, hw});
    double raw = 0;
    std::vector<double> eps(static_cast<std::size_t>(noisy.size()));
    for (auto& e : eps) {
      e = nrng.normal();
      raw += e * e;
    }
    const double scale = std::sqrt(mse_blur * static_cast<double>(noisy.size()) / raw);
    for (std::int64_t i = 0; i < noisy.size(); ++i)
      noisy[i] = std::clamp(img.pix[i] + scale * eps[static_cast<std::size_t>(i)], 0.0, 1.0);

    Var xi = make_leaf(img.pix.reshaped({1, 3, hw, hw}));
    const double pb = obj::perc_distance(xi, make_leaf(blur.reshaped({1, 3, hw, hw})), net)->value[0];
    const double pn = obj::perc_distance(xi, make_leaf(noisy.reshaped({1, 3, hw, hw})), net)->value[0];
    if (pb > pn) ++wins;
    ++total;
  }
  CHECK(wins * 2 > total);  // blur is the perceptually worse distortion on most images
}

TEST_CASE("rec_loss: identity zero, lambda_perc=0 reduces to scaled MSE, gradients check") {
  Fixture f;
  obj::LossWeights w;
  Var x = rand_image(2, 32, 51);
  Var same = make_leaf(x->value);
  CHECK(obj::rec_loss(x, same, w, &f.net)->value[0] == doctest::Approx(0.0));

  Var xh = rand_image(2, 32, 52, true);
  obj::LossWeights w0 = w;
  w0.lambda_perc = 0.0;
  const double pure = obj::rec_loss(x, xh, w0, nullptr)->value[0];
  CHECK(pure == doctest::Approx(o::mse(x, xh)->value[0] * 255.0 * 255.0).epsilon(1e-12));

  nn::ParamList leaves{{"x_hat", xh}};
  fd_all_params([&] { return obj::rec_loss(x, xh, w, &f.net); }, leaves, 10);
}

TEST_CASE("egp_loss arithmetic and bookkeeping") {
  obj::LossWeights w;  // lambda_rec=1, lambda_G=0.8
  Var rate = make_leaf(Tensor::from({1}, {1.0}));
  Var rec = make_leaf(Tensor::from({1}, {2.0}));
  Var gen = make_leaf(Tensor::from({1}, {0.5}));
  obj::EgpTerms t;
  Var total = obj::egp_loss(rate, rec, &gen, 2.5, w, &t);
  CHECK(total->value[0] == doctest::Approx(4.9).epsilon(1e-12));
  // zero rate, perfect reconstruction, fooled discriminator -> only the G term
  Var z0 = make_leaf(Tensor::from({1}, {0.0}));
  obj::EgpTerms t2;
  Var only_g = obj::egp_loss(z0, z0, &gen, 18.0, w, &t2);
  CHECK(only_g->value[0] == doctest::Approx(0.8 * 0.5).epsilon(1e-12));
  // the total always equals the weighted dot product of the breakdown
  CHECK(t.total == doctest::Approx(2.5 * t.rate + w.lambda_rec * t.rec + w.lambda_G * t.gen).epsilon(1e-12));
}

TEST_CASE("task losses: confident correct -> 0, uniform -> ln K, all-ignored -> error") {
  Tensor logits({2, 4});
  logits.at({0, 1}) = 100.0;
  logits.at({1, 3}) = 100.0;
  CHECK(obj::task_loss_cls(make_leaf(logits), {1, 3})->value[0] < 1e-12);
  CHECK(obj::task_loss_cls(make_leaf(Tensor::zeros({3, 7})), {0, 1, 2})->value[0] ==
        doctest::Approx(std::log(7.0)));
  std::vector<int> ignored(2 * 2 * 2, obj::kSegIgnoreIndex);
  CHECK_THROWS_AS(obj::task_loss_seg(make_leaf(Tensor::zeros({2, 3, 2, 2})), ignored), SpecError);
}

TEST_CASE("dist_loss: arithmetic, detached teacher, shape errors") {
  Rng rng(61);
  // construct stage pairs with exact MSEs 0.2 and 0.3
  Tensor a1({1, 2, 2, 2}), b1({1, 2, 2, 2}), a2({1, 3, 2, 2}), b2({1, 3, 2, 2});
  for (std::int64_t i = 0; i < a1.size(); ++i) b1[i] = a1[i] + std::sqrt(0.2);
  for (std::int64_t i = 0; i < a2.size(); ++i) b2[i] = a2[i] + std::sqrt(0.3);
  Var s1 = make_leaf(a1, true), s2 = make_leaf(a2, true);
  Var t1 = make_leaf(b1, true), t2 = make_leaf(b2, true);
  Var total = obj::dist_loss({s1, s2}, {t1, t2}, {});
  CHECK(total->value[0] == doctest::Approx(0.5).epsilon(1e-9));
  // teacher leaves receive no gradient (detached inside)
  backward(total);
  CHECK(!t1->grad_live);
  CHECK(!t2->grad_live);
  CHECK(s1->grad_live);
  // identical features -> zero
  CHECK(obj::dist_loss({make_leaf(a1)}, {make_leaf(a1)}, {})->value[0] == 0.0);
  // stage shape mismatch -> error
  CHECK_THROWS_AS(obj::dist_loss({s1}, {t2}, {}), SpecError);
  (void)rng;
}

TEST_CASE("adapt_loss arithmetic and frozen-codec rate term") {
  obj::LossWeights w;
  w.lambda_dist = 0.01;
  Var rate = make_leaf(Tensor::from({1}, {0.1}));
  Var task = make_leaf(Tensor::from({1}, {2.0}));
  Var dist = make_leaf(Tensor::from({1}, {5.0}));
  obj::AdaptTerms t;
  Var total = obj::adapt_loss(rate, task, dist, 2.5, w, &t);
  CHECK(total->value[0] == doctest::Approx(0.25 + 2.0 + 0.05).epsilon(1e-12));
  // perfect prediction + matched features -> rate term only
  Var z0 = make_leaf(Tensor::from({1}, {0.0}));
  CHECK(obj::adapt_loss(rate, z0, z0, 2.5, w, nullptr)->value[0] == doctest::Approx(0.25));

  // with a frozen codec the rate term contributes no trainable gradient
  Fixture f;
  auto cps = f.codec.all_params();
  nn::set_trainable(cps, false);
  Var x = rand_image(1, 32, 71);
  Var y = f.codec.analysis(x);
  Var zt = f.codec.apply_gain(y, 2);
  Var r = f.codec.rate_bpp(zt, 2, 32, 32);
  CHECK(!r->requires_grad);
  nn::set_trainable(cps, true);
}

TEST_CASE("rate and full coder losses pass finite differences") {
  // small instances, float64, step 1e-4, rel err < 1e-4 (checked at 1e-4/4)
  Fixture f;
  Var x = rand_image(1, 16, 81);
  auto cps = f.codec.all_params();
  auto build_rate = [&] {
    Var y = f.codec.analysis(x);
    return f.codec.rate_bpp(f.codec.apply_gain(y, 4), 4, 16, 16);
  };
  fd_all_params(build_rate, cps, 4);

  obj::LossWeights w;
  auto build_rec = [&] {
    Var y = f.codec.analysis(x);
    Var zt = f.codec.apply_gain(y, 4);
    Var xh = f.codec.synthesis(f.codec.apply_inv_gain(zt, 4));
    return obj::rec_loss(x, xh, w, &f.net);
  };
  fd_all_params(build_rec, cps, 3);
}
