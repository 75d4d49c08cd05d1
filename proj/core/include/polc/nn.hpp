#pragma once

#include <map>
#include <string>
#include <vector>

#include "polc/ops.hpp"
#include "polc/rng.hpp"

namespace polc::nn {

struct Param {
  std::string name;
  Var v;
};
using ParamList = std::vector<Param>;

Var param(Tensor init);  // trainable leaf

void set_trainable(ParamList& ps, bool trainable);
void zero_grads(ParamList& ps);
std::int64_t param_count(const ParamList& ps);
std::uint64_t params_hash(const ParamList& ps);
bool grads_all_zero(const ParamList& ps);

enum class Act { none, relu, gelu, leaky02 };
Var activate(Act a, const Var& x);

struct Conv2d {
  Var w, b;
  int cin = 0, cout = 0, k = 0, stride = 1, pad = 0;
  Conv2d() = default;
  Conv2d(int cin, int cout, int k, int stride, int pad, Rng& rng);
  Var forward(const Var& x) const { return ops::conv2d(x, w, b, stride, pad); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  Var w, b;
  int in = 0, out = 0;
  Linear() = default;
  Linear(int in, int out, Rng& rng);
  Var forward(const Var& x) const { return ops::linear(x, w, b); }
  void collect(const std::string& prefix, ParamList& o) const;
};

struct TConvRR {
  Var w, b;
  int cin = 0, cout = 0, r = 1;
  TConvRR() = default;
  TConvRR(int cin, int cout, int r, Rng& rng);
  Var forward(const Var& x) const { return ops::tconv_rr(x, w, b, r); }
  void collect(const std::string& prefix, ParamList& o) const;
};

// conv3x3 -> act -> conv3x3 with identity skip. This block definition is shared
// by the coder transforms, the vision stubs and the adapter.
struct ResBlock {
  Conv2d c1, c2;
  Act act = Act::relu;
  ResBlock() = default;
  ResBlock(int c, Act act, Rng& rng);
  Var forward(const Var& x) const;
  void collect(const std::string& prefix, ParamList& o) const;
};

// Adam with per-parameter moment buffers. Step count is shared; frozen
// parameters (no gradient buffer) are skipped entirely.
class Adam {
 public:
  explicit Adam(ParamList params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);
  void save_state(std::map<std::string, Tensor>& out, const std::string& prefix) const;
  void load_state(const std::map<std::string, Tensor>& in, const std::string& prefix);
  const ParamList& params() const { return params_; }
  std::int64_t t() const { return t_; }

 private:
  ParamList params_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace polc::nn
