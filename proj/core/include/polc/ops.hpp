#pragma once

#include <cstdint>
#include <vector>

#include "polc/autodiff.hpp"

namespace polc::ops {

// ---- elementwise / scalar ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var square(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);
Var reciprocal(const Var& a);
Var clamp_min(const Var& a, double lo);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh_(const Var& a);
Var sigmoid(const Var& a);
// Sigmoid with logits clamped to [-clip, clip]; output strictly inside (0,1).
Var sigmoid_clamped(const Var& a, double clip);
Var softplus(const Var& a);
Var gelu(const Var& a);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);
Var mse(const Var& a, const Var& b);

// ---- shapes / channels (NCHW) ----
Var concat_channels(const std::vector<Var>& xs);
Var slice_channels(const Var& x, int c0, int c1);
// y[n,c,...] = w[c] * x[n,c,...] (+ b[c])
Var channel_scale(const Var& x, const Var& w);
Var channel_affine(const Var& x, const Var& w, const Var& b);
// column k of a (C,K) matrix as a (C,) vector
Var gather_column(const Var& m, int k);

// ---- linear / conv ----
// x:(N,K) w:(M,K) b:(M) -> (N,M)
Var linear(const Var& x, const Var& w, const Var& b);
// x:(N,Ci,H,W) w:(Co,Ci,kh,kw) b:(Co), zero padding
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// transposed conv, kernel r == stride r (non-overlapping): w:(Ci,Co,r,r)
Var tconv_rr(const Var& x, const Var& w, const Var& b, int r);

// ---- spatial ----
Var pixel_shuffle(const Var& x, int r);    // (N,C*r^2,h,w) -> (N,C,h*r,w*r)
Var pixel_unshuffle(const Var& x, int r);  // inverse
Var nearest_upsample(const Var& x, int r);
Var avg_pool_global(const Var& x);              // (N,C,H,W) -> (N,C)
Var broadcast_spatial(const Var& v, int h, int w);  // (N,C) -> (N,C,h,w)
Var max_pool2(const Var& x);  // 2x2/2, ties resolved to the first max in scan order
Var bilinear_upsample(const Var& x, int oh, int ow);
// unit L2 normalization of the channel vector at every (n,h,w) site
Var site_normalize(const Var& x, double eps);

// ---- classification / segmentation losses ----
Var cross_entropy_cls(const Var& logits, const std::vector<int>& labels);
// logits:(N,K,H,W), labels row-major (N,H,W); pixels labeled `ignore` are
// excluded; throws SpecError if nothing remains.
Var cross_entropy_seg(const Var& logits, const std::vector<int>& labels, int ignore);

// ---- plain tensor helpers (no gradients) ----
Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_clamp01(const Tensor& a);
Tensor t_round(const Tensor& a);  // half away from zero
double t_mse(const Tensor& a, const Tensor& b);

}  // namespace polc::ops
