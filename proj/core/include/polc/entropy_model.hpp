#pragma once

#include "polc/nn.hpp"

namespace polc {

// Fully factorized per-channel probability model. Each channel owns a small
// monotone MLP c(x): positive weights (softplus-reparametrized), tanh-bounded
// gating, and a final sigmoid, so c is a strictly increasing CDF on R.
// Symbol mass in the gained domain is obtained by a change of variables
// through the (positive) per-channel gain: p(v) = c((v+1/2)/g) - c((v-1/2)/g).
class EntropyModel {
 public:
  EntropyModel() = default;
  EntropyModel(int channels, Rng& rng, double init_scale = 8.0);

  // Elementwise CDF of the base (un-gained) distribution; x is (N,C,h,w).
  Var cdf(const Var& x) const;

  // Interval mass around v (gained domain); inv_gain is a positive (C,) Var.
  // Result is floored away from zero so -log2 stays finite.
  Var mass(const Var& v_gained, const Var& inv_gain, double floor = 1e-9) const;

  void collect(const std::string& prefix, nn::ParamList& out) const;
  int channels() const { return c_; }
  int hidden() const { return f_; }

 private:
  int c_ = 0;
  int f_ = 3;
  Var w1_, b1_, a1_;  // (C,f)
  Var w2_, b2_, a2_;  // (C,f*f), (C,f), (C,f)
  Var w3_, b3_;       // (C,f), (C,1)
};

}  // namespace polc
