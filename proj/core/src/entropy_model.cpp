#include "polc/entropy_model.hpp"

#include <cmath>

namespace polc {

namespace o = ops;

EntropyModel::EntropyModel(int channels, Rng& rng, double init_scale) : c_(channels) {
  // Pick raw weights so softplus(w_raw) composes to roughly a logistic CDF of
  // scale init_scale; biases are spread so hidden units cover an offset range.
  const double t = std::pow(1.0 / init_scale, 1.0 / 3.0);
  const double raw = std::log(std::expm1(t));
  auto mat = [&](int cols, double fill) {
    Tensor m({c_, cols});
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = fill;
    return m;
  };
  auto umat = [&](int cols, double lo, double hi) {
    Tensor m({c_, cols});
    for (std::int64_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(lo, hi);
    return m;
  };
  w1_ = nn::param(mat(f_, raw));
  b1_ = nn::param(umat(f_, -1.0, 1.0));
  a1_ = nn::param(mat(f_, 0.0));
  w2_ = nn::param(mat(f_ * f_, raw));
  b2_ = nn::param(umat(f_, -1.0, 1.0));
  a2_ = nn::param(mat(f_, 0.0));
  w3_ = nn::param(mat(f_, raw));
  b3_ = nn::param(mat(1, 0.0));
}

Var EntropyModel::cdf(const Var& x) const {
  POLC_CHECK(x->value.ndim() == 4 && x->value.dim(1) == c_, "entropy cdf: want (N,C,h,w)");
  const Var w1 = o::softplus(w1_);
  const Var w2 = o::softplus(w2_);
  const Var w3 = o::softplus(w3_);
  const Var a1 = o::tanh_(a1_);
  const Var a2 = o::tanh_(a2_);

  // layer 1: 1 -> f, then gate u + a*tanh(u)
  std::vector<Var> g1(static_cast<std::size_t>(f_));
  for (int i = 0; i < f_; ++i) {
    Var u = o::channel_affine(x, o::gather_column(w1, i), o::gather_column(b1_, i));
    g1[static_cast<std::size_t>(i)] = o::add(u, o::channel_scale(o::tanh_(u), o::gather_column(a1, i)));
  }
  // layer 2: f -> f, gated
  std::vector<Var> g2(static_cast<std::size_t>(f_));
  for (int j = 0; j < f_; ++j) {
    Var u = o::channel_affine(g1[0], o::gather_column(w2, j * f_), o::gather_column(b2_, j));
    for (int i = 1; i < f_; ++i)
      u = o::add(u, o::channel_scale(g1[static_cast<std::size_t>(i)], o::gather_column(w2, j * f_ + i)));
    g2[static_cast<std::size_t>(j)] = o::add(u, o::channel_scale(o::tanh_(u), o::gather_column(a2, j)));
  }
  // layer 3: f -> 1
  Var out = o::channel_affine(g2[0], o::gather_column(w3, 0), o::gather_column(b3_, 0));
  for (int j = 1; j < f_; ++j)
    out = o::add(out, o::channel_scale(g2[static_cast<std::size_t>(j)], o::gather_column(w3, j)));
  return o::sigmoid(out);
}

Var EntropyModel::mass(const Var& v_gained, const Var& inv_gain, double floor) const {
  Var hi = cdf(o::channel_scale(o::add_scalar(v_gained, 0.5), inv_gain));
  Var lo = cdf(o::channel_scale(o::add_scalar(v_gained, -0.5), inv_gain));
  return o::clamp_min(o::sub(hi, lo), floor);
}

void EntropyModel::collect(const std::string& prefix, nn::ParamList& out) const {
  out.push_back({prefix + ".w1", w1_});
  out.push_back({prefix + ".b1", b1_});
  out.push_back({prefix + ".a1", a1_});
  out.push_back({prefix + ".w2", w2_});
  out.push_back({prefix + ".b2", b2_});
  out.push_back({prefix + ".a2", a2_});
  out.push_back({prefix + ".w3", w3_});
  out.push_back({prefix + ".b3", b3_});
}

}  // namespace polc
