#include "polc/nn.hpp"

#include <cmath>

namespace polc::nn {

Var param(Tensor init) { return make_leaf(std::move(init), true); }

void set_trainable(ParamList& ps, bool trainable) {
  for (auto& p : ps) p.v->requires_grad = trainable;
}

void zero_grads(ParamList& ps) {
  for (auto& p : ps) p.v->drop_grad();
}

std::int64_t param_count(const ParamList& ps) {
  std::int64_t n = 0;
  for (const auto& p : ps) n += p.v->value.size();
  return n;
}

std::uint64_t params_hash(const ParamList& ps) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : ps) {
    h = fnv1a(p.name.data(), p.name.size(), h);
    h = tensor_hash(p.v->value, h);
  }
  return h;
}

bool grads_all_zero(const ParamList& ps) {
  for (const auto& p : ps) {
    if (!p.v->grad_live) continue;
    for (std::int64_t i = 0; i < p.v->grad.size(); ++i)
      if (p.v->grad[i] != 0.0) return false;
  }
  return true;
}

Var activate(Act a, const Var& x) {
  switch (a) {
    case Act::none:
      return x;
    case Act::relu:
      return ops::relu(x);
    case Act::gelu:
      return ops::gelu(x);
    case Act::leaky02:
      return ops::leaky_relu(x, 0.2);
  }
  throw Error("unknown activation");
}

Conv2d::Conv2d(int cin_, int cout_, int k_, int stride_, int pad_, Rng& rng)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(k) * k * cin));
  w = param(Tensor::randn({cout, cin, k, k}, rng, stddev));
  b = param(Tensor::zeros({cout}));
}

void Conv2d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w", w});
  out.push_back({prefix + ".b", b});
}

Linear::Linear(int in_, int out_, Rng& rng) : in(in_), out(out_) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  w = param(Tensor::randn({out, in}, rng, stddev));
  b = param(Tensor::zeros({out}));
}

void Linear::collect(const std::string& prefix, ParamList& o) const {
  o.push_back({prefix + ".w", w});
  o.push_back({prefix + ".b", b});
}

TConvRR::TConvRR(int cin_, int cout_, int r_, Rng& rng) : cin(cin_), cout(cout_), r(r_) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(cin));
  w = param(Tensor::randn({cin, cout, r, r}, rng, stddev));
  b = param(Tensor::zeros({cout}));
}

void TConvRR::collect(const std::string& prefix, ParamList& o) const {
  o.push_back({prefix + ".w", w});
  o.push_back({prefix + ".b", b});
}

ResBlock::ResBlock(int c, Act act_, Rng& rng)
    : c1(c, c, 3, 1, 1, rng), c2(c, c, 3, 1, 1, rng), act(act_) {}

Var ResBlock::forward(const Var& x) const { return ops::add(x, c2.forward(activate(act, c1.forward(x)))); }

void ResBlock::collect(const std::string& prefix, ParamList& o) const {
  c1.collect(prefix + ".c1", o);
  c2.collect(prefix + ".c2", o);
}

Adam::Adam(ParamList params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.v->value.shape());
    v_.emplace_back(p.v->value.shape());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].v;
    if (!node.requires_grad || !node.grad_live) continue;
    double* m = m_[i].data();
    double* v = v_[i].data();
    double* x = node.value.data();
    const double* g = node.grad.data();
    const std::int64_t n = node.value.size();
    for (std::int64_t j = 0; j < n; ++j) {
      m[j] = beta1_ * m[j] + (1 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1 - beta2_) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::save_state(std::map<std::string, Tensor>& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out[prefix + ".m." + params_[i].name] = m_[i];
    out[prefix + ".v." + params_[i].name] = v_[i];
  }
  Tensor t({1});
  t[0] = static_cast<double>(t_);
  out[prefix + ".t"] = t;
}

void Adam::load_state(const std::map<std::string, Tensor>& in, const std::string& prefix) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto mi = in.find(prefix + ".m." + params_[i].name);
    auto vi = in.find(prefix + ".v." + params_[i].name);
    POLC_CHECK_T(mi != in.end() && vi != in.end(), IncompatError,
                 "optimizer state missing for " + params_[i].name);
    POLC_CHECK_T(mi->second.same_shape(m_[i]) && vi->second.same_shape(v_[i]), IncompatError,
                 "optimizer state shape mismatch for " + params_[i].name);
    m_[i] = mi->second;
    v_[i] = vi->second;
  }
  auto ti = in.find(prefix + ".t");
  POLC_CHECK_T(ti != in.end(), IncompatError, "optimizer step counter missing");
  t_ = static_cast<std::int64_t>(ti->second[0]);
}

}  // namespace polc::nn
