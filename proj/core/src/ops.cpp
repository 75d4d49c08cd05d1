#include "polc/ops.hpp"

#include <cmath>

namespace polc::ops {

using detail::make_op;

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_shape(const Var& a, const Var& b, const char* op) {
  POLC_CHECK(a->value.same_shape(b->value),
             std::string(op) + ": shape mismatch " + Tensor::shape_str(a->value.shape()) + " vs " +
                 Tensor::shape_str(b->value.shape()));
}

// Accumulate src into parent's grad buffer.
inline void axpy(Node& parent, const Tensor& src) {
  parent.ensure_grad();
  double* g = parent.grad.data();
  const double* s = src.data();
  const std::int64_t n = src.size();
  for (std::int64_t i = 0; i < n; ++i) g[i] += s[i];
}

// Elementwise unary helper: y = f(x), dx += dy * dfdx(x, y)
template <typename F, typename DF>
Var unary(const Var& a, F f, DF dfdx) {
  Tensor out(a->value.shape());
  const double* x = a->value.data();
  double* y = out.data();
  const std::int64_t n = out.size();
  for (std::int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
  return make_op(std::move(out), {a}, [dfdx](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double* x = p.value.data();
    const double* yv = node.value.data();
    const double* gy = node.grad.data();
    double* gx = p.grad.data();
    const std::int64_t n = node.value.size();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += gy[i] * dfdx(x[i], yv[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a->value.shape());
  const std::int64_t n = out.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
  return make_op(std::move(out), {a, b}, [](Node& node) {
    for (int k = 0; k < 2; ++k) {
      Node& p = *node.parents[k];
      if (p.requires_grad) axpy(p, node.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a->value.shape());
  const std::int64_t n = out.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a->value[i] - b->value[i];
  return make_op(std::move(out), {a, b}, [](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    if (pa.requires_grad) axpy(pa, node.grad);
    if (pb.requires_grad) {
      pb.ensure_grad();
      double* g = pb.grad.data();
      const double* s = node.grad.data();
      for (std::int64_t i = 0; i < node.grad.size(); ++i) g[i] -= s[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a->value.shape());
  const std::int64_t n = out.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a->value[i] * b->value[i];
  return make_op(std::move(out), {a, b}, [](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    const std::int64_t n = node.grad.size();
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) pa.grad[i] += node.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) pb.grad[i] += node.grad[i] * pa.value[i];
    }
  });
}

Var add_scalar(const Var& a, double s) {
  return unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var mul_scalar(const Var& a, double s) {
  return unary(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var exp_(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log_(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var reciprocal(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var clamp_min(const Var& a, double lo) {
  return unary(
      a, [lo](double x) { return x < lo ? lo : x; },
      [lo](double x, double) { return x < lo ? 0.0 : 1.0; });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var tanh_(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var sigmoid_clamped(const Var& a, double clip) {
  return unary(
      a,
      [clip](double x) {
        double t = x > clip ? clip : (x < -clip ? -clip : x);
        return 1.0 / (1.0 + std::exp(-t));
      },
      [clip](double x, double y) { return (x > clip || x < -clip) ? 0.0 : y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary(
      a,
      [](double x) { return x > 30 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var gelu(const Var& a) {
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double dens = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return phi + x * dens;
      });
}

Var sum(const Var& a) {
  Tensor out({1});
  double s = 0;
  const std::int64_t n = a->value.size();
  for (std::int64_t i = 0; i < n; ++i) s += a->value[i];
  out[0] = s;
  return make_op(std::move(out), {a}, [](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double g = node.grad[0];
    double* gx = p.grad.data();
    const std::int64_t n = p.value.size();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g;
  });
}

Var mean(const Var& a) {
  POLC_CHECK(a->value.size() > 0, "mean of empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a->value.size()));
}

Var mse(const Var& a, const Var& b) {
  check_same_shape(a, b, "mse");
  Tensor out({1});
  const std::int64_t n = a->value.size();
  double s = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    double d = a->value[i] - b->value[i];
    s += d * d;
  }
  out[0] = s / static_cast<double>(n);
  return make_op(std::move(out), {a, b}, [](Node& node) {
    Node& pa = *node.parents[0];
    Node& pb = *node.parents[1];
    const std::int64_t n = pa.value.size();
    const double c = 2.0 * node.grad[0] / static_cast<double>(n);
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) pa.grad[i] += c * (pa.value[i] - pb.value[i]);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) pb.grad[i] -= c * (pa.value[i] - pb.value[i]);
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  POLC_CHECK(!xs.empty(), "concat_channels: empty input");
  const auto& s0 = xs[0]->value.shape();
  POLC_CHECK(s0.size() == 4, "concat_channels: want NCHW");
  int n = s0[0], h = s0[2], w = s0[3];
  int ctot = 0;
  for (const auto& x : xs) {
    const auto& s = x->value.shape();
    POLC_CHECK(s.size() == 4 && s[0] == n && s[2] == h && s[3] == w, "concat_channels: shape mismatch");
    ctot += s[1];
  }
  Tensor out({n, ctot, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (int bi = 0; bi < n; ++bi) {
    std::int64_t coff = 0;
    for (const auto& x : xs) {
      const int c = x->value.dim(1);
      const double* src = x->value.data() + (static_cast<std::int64_t>(bi) * c) * plane;
      double* dst = out.data() + (static_cast<std::int64_t>(bi) * ctot + coff) * plane;
      for (std::int64_t i = 0; i < c * plane; ++i) dst[i] = src[i];
      coff += c;
    }
  }
  return make_op(std::move(out), xs, [n, plane, ctot](Node& node) {
    for (int bi = 0; bi < n; ++bi) {
      std::int64_t coff = 0;
      for (auto& pv : node.parents) {
        Node& p = *pv;
        const int c = p.value.dim(1);
        if (p.requires_grad) {
          p.ensure_grad();
          const double* src = node.grad.data() + (static_cast<std::int64_t>(bi) * ctot + coff) * plane;
          double* dst = p.grad.data() + (static_cast<std::int64_t>(bi) * c) * plane;
          for (std::int64_t i = 0; i < c * plane; ++i) dst[i] += src[i];
        }
        coff += c;
      }
    }
  });
}

Var slice_channels(const Var& x, int c0, int c1) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4 && c0 >= 0 && c1 <= s[1] && c0 < c1, "slice_channels: bad range");
  int n = s[0], c = s[1], h = s[2], w = s[3];
  const int cs = c1 - c0;
  Tensor out({n, cs, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (int bi = 0; bi < n; ++bi) {
    const double* src = x->value.data() + (static_cast<std::int64_t>(bi) * c + c0) * plane;
    double* dst = out.data() + static_cast<std::int64_t>(bi) * cs * plane;
    for (std::int64_t i = 0; i < cs * plane; ++i) dst[i] = src[i];
  }
  return make_op(std::move(out), {x}, [n, c, c0, cs, plane](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int bi = 0; bi < n; ++bi) {
      const double* src = node.grad.data() + static_cast<std::int64_t>(bi) * cs * plane;
      double* dst = p.grad.data() + (static_cast<std::int64_t>(bi) * c + c0) * plane;
      for (std::int64_t i = 0; i < cs * plane; ++i) dst[i] += src[i];
    }
  });
}

namespace {
// Shared body for channel_scale / channel_affine over (N,C,rest...).
Var channel_op(const Var& x, const Var& w, const Var* b) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() >= 2, "channel op: want (N,C,...)");
  const int c = s[1];
  POLC_CHECK(w->value.ndim() == 1 && w->value.dim(0) == c, "channel op: weight size");
  if (b) POLC_CHECK((*b)->value.ndim() == 1 && (*b)->value.dim(0) == c, "channel op: bias size");
  const int n = s[0];
  const std::int64_t inner = x->value.size() / (static_cast<std::int64_t>(n) * c);
  Tensor out(s);
  for (int bi = 0; bi < n; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      const double wc = w->value[ci];
      const double bc = b ? (*b)->value[ci] : 0.0;
      const double* src = x->value.data() + (static_cast<std::int64_t>(bi) * c + ci) * inner;
      double* dst = out.data() + (static_cast<std::int64_t>(bi) * c + ci) * inner;
      for (std::int64_t i = 0; i < inner; ++i) dst[i] = wc * src[i] + bc;
    }
  std::vector<Var> parents = b ? std::vector<Var>{x, w, *b} : std::vector<Var>{x, w};
  bool has_b = b != nullptr;
  return make_op(std::move(out), std::move(parents), [n, c, inner, has_b](Node& node) {
    Node& px = *node.parents[0];
    Node& pw = *node.parents[1];
    if (px.requires_grad) px.ensure_grad();
    if (pw.requires_grad) pw.ensure_grad();
    Node* pb = has_b ? node.parents[2].get() : nullptr;
    if (pb && pb->requires_grad) pb->ensure_grad();
    for (int bi = 0; bi < n; ++bi)
      for (int ci = 0; ci < c; ++ci) {
        const std::int64_t off = (static_cast<std::int64_t>(bi) * c + ci) * inner;
        const double* g = node.grad.data() + off;
        const double wc = pw.value[ci];
        if (px.requires_grad) {
          double* gx = px.grad.data() + off;
          for (std::int64_t i = 0; i < inner; ++i) gx[i] += wc * g[i];
        }
        if (pw.requires_grad) {
          const double* xv = px.value.data() + off;
          double acc = 0;
          for (std::int64_t i = 0; i < inner; ++i) acc += g[i] * xv[i];
          pw.grad[ci] += acc;
        }
        if (pb && pb->requires_grad) {
          double acc = 0;
          for (std::int64_t i = 0; i < inner; ++i) acc += g[i];
          pb->grad[ci] += acc;
        }
      }
  });
}
}  // namespace

Var channel_scale(const Var& x, const Var& w) { return channel_op(x, w, nullptr); }
Var channel_affine(const Var& x, const Var& w, const Var& b) { return channel_op(x, w, &b); }

Var gather_column(const Var& m, int k) {
  const auto& s = m->value.shape();
  POLC_CHECK(s.size() == 2 && k >= 0 && k < s[1], "gather_column: bad index");
  const int c = s[0], cols = s[1];
  Tensor out({c});
  for (int i = 0; i < c; ++i) out[i] = m->value[static_cast<std::int64_t>(i) * cols + k];
  return make_op(std::move(out), {m}, [c, cols, k](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int i = 0; i < c; ++i) p.grad[static_cast<std::int64_t>(i) * cols + k] += node.grad[i];
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  POLC_CHECK(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[1], "linear: shape mismatch");
  POLC_CHECK(b->value.ndim() == 1 && b->value.dim(0) == ws[0], "linear: bias size");
  const int n = xs[0], kk = xs[1], m = ws[0];
  Tensor out({n, m});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double* xr = x->value.data() + static_cast<std::int64_t>(i) * kk;
      const double* wr = w->value.data() + static_cast<std::int64_t>(j) * kk;
      double acc = b->value[j];
      for (int t = 0; t < kk; ++t) acc += xr[t] * wr[t];
      out[static_cast<std::int64_t>(i) * m + j] = acc;
    }
  return make_op(std::move(out), {x, w, b}, [n, kk, m](Node& node) {
    Node& px = *node.parents[0];
    Node& pw = *node.parents[1];
    Node& pb = *node.parents[2];
    const double* g = node.grad.data();
    if (px.requires_grad) {
      px.ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int t = 0; t < kk; ++t) {
          double acc = 0;
          for (int j = 0; j < m; ++j)
            acc += g[static_cast<std::int64_t>(i) * m + j] * pw.value[static_cast<std::int64_t>(j) * kk + t];
          px.grad[static_cast<std::int64_t>(i) * kk + t] += acc;
        }
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      for (int j = 0; j < m; ++j)
        for (int t = 0; t < kk; ++t) {
          double acc = 0;
          for (int i = 0; i < n; ++i)
            acc += g[static_cast<std::int64_t>(i) * m + j] * px.value[static_cast<std::int64_t>(i) * kk + t];
          pw.grad[static_cast<std::int64_t>(j) * kk + t] += acc;
        }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int j = 0; j < m; ++j) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += g[static_cast<std::int64_t>(i) * m + j];
        pb.grad[j] += acc;
      }
    }
  });
}


namespace {
// first/last output column for which input column ox*stride + kx - pad is valid
inline int kx0_for(int kx, int pad, int stride) {
  int ox = 0;
  const int off = kx - pad;
  if (off < 0) ox = (-off + stride - 1) / stride;
  return ox;
}
inline int kx1_for(int kx, int pad, int stride, int in_w, int out_w) {
  const int off = kx - pad;
  int ox = (in_w - 1 - off) / stride + 1;  // last valid + 1
  if (off > in_w - 1) ox = 0;
  return ox < out_w ? ox : out_w;
}
}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  POLC_CHECK(xs.size() == 4 && ws.size() == 4, "conv2d: want NCHW x and (Co,Ci,kh,kw) w");
  POLC_CHECK(xs[1] == ws[1], "conv2d: channel mismatch");
  POLC_CHECK(b->value.ndim() == 1 && b->value.dim(0) == ws[0], "conv2d: bias size");
  POLC_CHECK(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  const int n = xs[0], ci = xs[1], h = xs[2], wd = xs[3];
  const int co = ws[0], kh = ws[2], kw = ws[3];
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (wd + 2 * pad - kw) / stride + 1;
  POLC_CHECK(oh >= 1 && ow >= 1, "conv2d: empty output");

  Tensor out({n, co, oh, ow});
  {
    const double* xv = x->value.data();
    const double* wv = w->value.data();
    const double* bv = b->value.data();
    double* ov = out.data();
    const std::int64_t total = static_cast<std::int64_t>(n) * co;
    // valid kernel spans per output coordinate keep the hot loops branch-free
    std::vector<int> ky0(static_cast<std::size_t>(oh)), ky1(static_cast<std::size_t>(oh));
    for (int oy = 0; oy < oh; ++oy) {
      int a = pad - oy * stride;
      ky0[static_cast<std::size_t>(oy)] = a > 0 ? a : 0;
      int b2 = h + pad - oy * stride;
      ky1[static_cast<std::size_t>(oy)] = b2 < kh ? b2 : kh;
    }
#pragma omp parallel for schedule(static) if (total* oh* ow* ci* kh* kw > 16384)
    for (std::int64_t nc = 0; nc < total; ++nc) {
      const int bi = static_cast<int>(nc / co);
      const int oc = static_cast<int>(nc % co);
      const double* wbase = wv + static_cast<std::int64_t>(oc) * ci * kh * kw;
      for (int oy = 0; oy < oh; ++oy) {
        const int kya = ky0[static_cast<std::size_t>(oy)], kyb = ky1[static_cast<std::size_t>(oy)];
        double* orow = ov + ((static_cast<std::int64_t>(bi) * co + oc) * oh + oy) * ow;
        for (int ox = 0; ox < ow; ++ox) orow[ox] = bv[oc];
        for (int ic = 0; ic < ci; ++ic) {
          const double* xplane = xv + (static_cast<std::int64_t>(bi) * ci + ic) * h * wd;
          const double* wk = wbase + static_cast<std::int64_t>(ic) * kh * kw;
          for (int ky = kya; ky < kyb; ++ky) {
            const double* xrow = xplane + static_cast<std::int64_t>(oy * stride + ky - pad) * wd;
            const double* wrow = wk + static_cast<std::int64_t>(ky) * kw;
            for (int kx = 0; kx < kw; ++kx) {
              const double wval = wrow[kx];
              const int xbase = kx - pad;
              const int oxa = kx0_for(kx, pad, stride);
              const int oxb = kx1_for(kx, pad, stride, wd, ow);
              if (stride == 1) {
                const double* xp = xrow + xbase;
                for (int ox = oxa; ox < oxb; ++ox) orow[ox] += wval * xp[ox];
              } else {
                for (int ox = oxa; ox < oxb; ++ox)
                  orow[ox] += wval * xrow[static_cast<std::int64_t>(ox) * stride + xbase];
              }
            }
          }
        }
      }
    }
  }

  return make_op(std::move(out), {x, w, b}, [n, ci, h, wd, co, kh, kw, oh, ow, stride, pad](Node& node) {
    Node& px = *node.parents[0];
    Node& pw = *node.parents[1];
    Node& pb = *node.parents[2];
    const double* g = node.grad.data();
    if (px.requires_grad) {
      px.ensure_grad();
      double* gx = px.grad.data();
      const double* wv = pw.value.data();
      const std::int64_t total = static_cast<std::int64_t>(n) * ci;
#pragma omp parallel for schedule(static) if (total* h* wd* co > 16384)
      for (std::int64_t nc = 0; nc < total; ++nc) {
        const int bi = static_cast<int>(nc / ci);
        const int ic = static_cast<int>(nc % ci);
        double* gplane = gx + (static_cast<std::int64_t>(bi) * ci + ic) * h * wd;
        for (int oc = 0; oc < co; ++oc) {
          const double* gout = g + (static_cast<std::int64_t>(bi) * co + oc) * oh * ow;
          const double* wk = wv + (static_cast<std::int64_t>(oc) * ci + ic) * kh * kw;
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const double wval = wk[static_cast<std::int64_t>(ky) * kw + kx];
              for (int oy = 0; oy < oh; ++oy) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                double* grow = gplane + static_cast<std::int64_t>(iy) * wd + (kx - pad);
                const double* gorow = gout + static_cast<std::int64_t>(oy) * ow;
                const int oxa = kx0_for(kx, pad, stride);
                const int oxb = kx1_for(kx, pad, stride, wd, ow);
                if (stride == 1) {
                  for (int ox = oxa; ox < oxb; ++ox) grow[ox] += wval * gorow[ox];
                } else {
                  for (int ox = oxa; ox < oxb; ++ox)
                    grow[static_cast<std::int64_t>(ox) * stride] += wval * gorow[ox];
                }
              }
            }
        }
      }
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      double* gw = pw.grad.data();
      const double* xv = px.value.data();
      const std::int64_t total = static_cast<std::int64_t>(co) * ci;
#pragma omp parallel for schedule(static) if (total* kh* kw* n* oh* ow > 16384)
      for (std::int64_t cc = 0; cc < total; ++cc) {
        const int oc = static_cast<int>(cc / ci);
        const int ic = static_cast<int>(cc % ci);
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            // valid output span for this kernel tap
            int oy0 = 0, ox0 = 0;
            while (oy0 * stride + ky - pad < 0) ++oy0;
            while (ox0 * stride + kx - pad < 0) ++ox0;
            int oy1 = oh, ox1 = ow;
            while (oy1 > oy0 && (oy1 - 1) * stride + ky - pad >= h) --oy1;
            while (ox1 > ox0 && (ox1 - 1) * stride + kx - pad >= wd) --ox1;
            double acc = 0;
            for (int bi = 0; bi < n; ++bi) {
              const double* gout = g + (static_cast<std::int64_t>(bi) * co + oc) * oh * ow;
              const double* xplane = xv + (static_cast<std::int64_t>(bi) * ci + ic) * h * wd;
              for (int oy = oy0; oy < oy1; ++oy) {
                const double* xrow = xplane + static_cast<std::int64_t>(oy * stride + ky - pad) * wd + (kx - pad);
                const double* grow = gout + static_cast<std::int64_t>(oy) * ow;
                double a2 = 0;
                if (stride == 1) {
                  for (int ox = ox0; ox < ox1; ++ox) a2 += grow[ox] * xrow[ox];
                } else {
                  for (int ox = ox0; ox < ox1; ++ox) a2 += grow[ox] * xrow[static_cast<std::int64_t>(ox) * stride];
                }
                acc += a2;
              }
            }
            gw[(cc * kh + ky) * kw + kx] += acc;
          }
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int oc = 0; oc < co; ++oc) {
        double acc = 0;
        for (int bi = 0; bi < n; ++bi) {
          const double* gout = g + (static_cast<std::int64_t>(bi) * co + oc) * oh * ow;
          for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) acc += gout[i];
        }
        pb.grad[oc] += acc;
      }
    }
  });
}

Var tconv_rr(const Var& x, const Var& w, const Var& b, int r) {
  const auto& xs = x->value.shape();
  const auto& ws = w->value.shape();
  POLC_CHECK(xs.size() == 4 && ws.size() == 4, "tconv_rr: want NCHW");
  POLC_CHECK(ws[0] == xs[1] && ws[2] == r && ws[3] == r, "tconv_rr: weight shape");
  POLC_CHECK(b->value.ndim() == 1 && b->value.dim(0) == ws[1], "tconv_rr: bias size");
  const int n = xs[0], ci = xs[1], h = xs[2], wd = xs[3], co = ws[1];
  Tensor out({n, co, h * r, wd * r});
  {
    double* ov = out.data();
    const double* xv = x->value.data();
    const double* wv = w->value.data();
    const int oh = h * r, ow = wd * r;
    const std::int64_t total = static_cast<std::int64_t>(n) * co;
#pragma omp parallel for schedule(static) if (total* h* wd* ci* r* r > 16384)
    for (std::int64_t nc = 0; nc < total; ++nc) {
      const int bi = static_cast<int>(nc / co);
      const int oc = static_cast<int>(nc % co);
      double* oplane = ov + nc * oh * ow;
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) oplane[i] = b->value[oc];
      for (int ic = 0; ic < ci; ++ic) {
        const double* xplane = xv + (static_cast<std::int64_t>(bi) * ci + ic) * h * wd;
        const double* wk = wv + (static_cast<std::int64_t>(ic) * co + oc) * r * r;
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < wd; ++xx) {
            const double v = xplane[static_cast<std::int64_t>(y) * wd + xx];
            for (int dy = 0; dy < r; ++dy)
              for (int dx = 0; dx < r; ++dx)
                oplane[(static_cast<std::int64_t>(y) * r + dy) * ow + xx * r + dx] += v * wk[dy * r + dx];
          }
      }
    }
  }
  return make_op(std::move(out), {x, w, b}, [n, ci, h, wd, co, r](Node& node) {
    Node& px = *node.parents[0];
    Node& pw = *node.parents[1];
    Node& pb = *node.parents[2];
    const double* g = node.grad.data();
    const int oh = h * r, ow = wd * r;
    if (px.requires_grad) {
      px.ensure_grad();
      const std::int64_t total = static_cast<std::int64_t>(n) * ci;
#pragma omp parallel for schedule(static) if (total* h* wd* co* r* r > 16384)
      for (std::int64_t nc = 0; nc < total; ++nc) {
        const int bi = static_cast<int>(nc / ci);
        const int ic = static_cast<int>(nc % ci);
        double* gx = px.grad.data() + nc * h * wd;
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < wd; ++xx) {
            double acc = 0;
            for (int oc = 0; oc < co; ++oc) {
              const double* gplane = g + (static_cast<std::int64_t>(bi) * co + oc) * oh * ow;
              const double* wk = pw.value.data() + (static_cast<std::int64_t>(ic) * co + oc) * r * r;
              for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx)
                  acc += gplane[(static_cast<std::int64_t>(y) * r + dy) * ow + xx * r + dx] * wk[dy * r + dx];
            }
            gx[static_cast<std::int64_t>(y) * wd + xx] += acc;
          }
      }
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      const double* xv = px.value.data();
      for (int ic = 0; ic < ci; ++ic)
        for (int oc = 0; oc < co; ++oc)
          for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
              double acc = 0;
              for (int bi = 0; bi < n; ++bi) {
                const double* xplane = xv + (static_cast<std::int64_t>(bi) * ci + ic) * h * wd;
                const double* gplane = g + (static_cast<std::int64_t>(bi) * co + oc) * oh * ow;
                for (int y = 0; y < h; ++y)
                  for (int xx = 0; xx < wd; ++xx)
                    acc += xplane[static_cast<std::int64_t>(y) * wd + xx] *
                           gplane[(static_cast<std::int64_t>(y) * r + dy) * ow + xx * r + dx];
              }
              pw.grad[((static_cast<std::int64_t>(ic) * co + oc) * r + dy) * r + dx] += acc;
            }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int oc = 0; oc < co; ++oc) {
        double acc = 0;
        for (int bi = 0; bi < n; ++bi) {
          const double* gplane = g + (static_cast<std::int64_t>(bi) * co + oc) * oh * ow;
          for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) acc += gplane[i];
        }
        pb.grad[oc] += acc;
      }
    }
  });
}

Var pixel_shuffle(const Var& x, int r) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4 && s[1] % (r * r) == 0, "pixel_shuffle: channels not divisible by r^2");
  const int n = s[0], c = s[1] / (r * r), h = s[2], w = s[3];
  Tensor out({n, c, h * r, w * r});
  const int oh = h * r, ow = w * r;
  for (int bi = 0; bi < n; ++bi)
    for (int oc = 0; oc < c; ++oc)
      for (int y = 0; y < h; ++y)
        for (int dy = 0; dy < r; ++dy)
          for (int xx = 0; xx < w; ++xx)
            for (int dx = 0; dx < r; ++dx) {
              const int ic = oc * r * r + dy * r + dx;
              out[((static_cast<std::int64_t>(bi) * c + oc) * oh + y * r + dy) * ow + xx * r + dx] =
                  x->value[((static_cast<std::int64_t>(bi) * c * r * r + ic) * h + y) * w + xx];
            }
  return make_op(std::move(out), {x}, [n, c, h, w, r](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const int oh = h * r, ow = w * r;
    for (int bi = 0; bi < n; ++bi)
      for (int oc = 0; oc < c; ++oc)
        for (int y = 0; y < h; ++y)
          for (int dy = 0; dy < r; ++dy)
            for (int xx = 0; xx < w; ++xx)
              for (int dx = 0; dx < r; ++dx) {
                const int ic = oc * r * r + dy * r + dx;
                p.grad[((static_cast<std::int64_t>(bi) * c * r * r + ic) * h + y) * w + xx] +=
                    node.grad[((static_cast<std::int64_t>(bi) * c + oc) * oh + y * r + dy) * ow + xx * r + dx];
              }
  });
}

Var pixel_unshuffle(const Var& x, int r) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4 && s[2] % r == 0 && s[3] % r == 0, "pixel_unshuffle: dims not divisible by r");
  const int n = s[0], c = s[1], oh = s[2], ow = s[3];
  const int h = oh / r, w = ow / r;
  Tensor out({n, c * r * r, h, w});
  for (int bi = 0; bi < n; ++bi)
    for (int ic = 0; ic < c; ++ic)
      for (int y = 0; y < h; ++y)
        for (int dy = 0; dy < r; ++dy)
          for (int xx = 0; xx < w; ++xx)
            for (int dx = 0; dx < r; ++dx) {
              const int oc = ic * r * r + dy * r + dx;
              out[((static_cast<std::int64_t>(bi) * c * r * r + oc) * h + y) * w + xx] =
                  x->value[((static_cast<std::int64_t>(bi) * c + ic) * oh + y * r + dy) * ow + xx * r + dx];
            }
  return make_op(std::move(out), {x}, [n, c, h, w, r](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const int oh = h * r, ow = w * r;
    for (int bi = 0; bi < n; ++bi)
      for (int ic = 0; ic < c; ++ic)
        for (int y = 0; y < h; ++y)
          for (int dy = 0; dy < r; ++dy)
            for (int xx = 0; xx < w; ++xx)
              for (int dx = 0; dx < r; ++dx) {
                const int oc = ic * r * r + dy * r + dx;
                p.grad[((static_cast<std::int64_t>(bi) * c + ic) * oh + y * r + dy) * ow + xx * r + dx] +=
                    node.grad[((static_cast<std::int64_t>(bi) * c * r * r + oc) * h + y) * w + xx];
              }
  });
}

Var nearest_upsample(const Var& x, int r) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4 && r >= 1, "nearest_upsample: want NCHW");
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  Tensor out({n, c, h * r, w * r});
  const int ow = w * r;
  for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
    const double* src = x->value.data() + pl * h * w;
    double* dst = out.data() + pl * h * r * ow;
    for (int y = 0; y < h; ++y)
      for (int dy = 0; dy < r; ++dy)
        for (int xx = 0; xx < w; ++xx)
          for (int dx = 0; dx < r; ++dx) dst[(static_cast<std::int64_t>(y) * r + dy) * ow + xx * r + dx] = src[static_cast<std::int64_t>(y) * w + xx];
  }
  return make_op(std::move(out), {x}, [n, c, h, w, r](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const int ow = w * r;
    for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
      const double* g = node.grad.data() + pl * h * r * ow;
      double* gx = p.grad.data() + pl * h * w;
      for (int y = 0; y < h; ++y)
        for (int dy = 0; dy < r; ++dy)
          for (int xx = 0; xx < w; ++xx)
            for (int dx = 0; dx < r; ++dx) gx[static_cast<std::int64_t>(y) * w + xx] += g[(static_cast<std::int64_t>(y) * r + dy) * ow + xx * r + dx];
    }
  });
}

Var avg_pool_global(const Var& x) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4, "avg_pool_global: want NCHW");
  const int n = s[0], c = s[1];
  const std::int64_t plane = static_cast<std::int64_t>(s[2]) * s[3];
  Tensor out({n, c});
  for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
    const double* src = x->value.data() + pl * plane;
    double acc = 0;
    for (std::int64_t i = 0; i < plane; ++i) acc += src[i];
    out[pl] = acc / static_cast<double>(plane);
  }
  return make_op(std::move(out), {x}, [n, c, plane](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
      const double g = node.grad[pl] / static_cast<double>(plane);
      double* gx = p.grad.data() + pl * plane;
      for (std::int64_t i = 0; i < plane; ++i) gx[i] += g;
    }
  });
}

Var broadcast_spatial(const Var& v, int h, int w) {
  const auto& s = v->value.shape();
  POLC_CHECK(s.size() == 2, "broadcast_spatial: want (N,C)");
  const int n = s[0], c = s[1];
  Tensor out({n, c, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
    double* dst = out.data() + pl * plane;
    const double val = v->value[pl];
    for (std::int64_t i = 0; i < plane; ++i) dst[i] = val;
  }
  return make_op(std::move(out), {v}, [n, c, plane](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
      const double* g = node.grad.data() + pl * plane;
      double acc = 0;
      for (std::int64_t i = 0; i < plane; ++i) acc += g[i];
      p.grad[pl] += acc;
    }
  });
}

Var max_pool2(const Var& x) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4 && s[2] % 2 == 0 && s[3] % 2 == 0, "max_pool2: odd dims");
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  const int oh = h / 2, ow = w / 2;
  Tensor out({n, c, oh, ow});
  for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
    const double* src = x->value.data() + pl * h * w;
    double* dst = out.data() + pl * oh * ow;
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        double m = src[static_cast<std::int64_t>(2 * y) * w + 2 * xx];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            double v = src[(static_cast<std::int64_t>(2 * y + dy)) * w + 2 * xx + dx];
            if (v > m) m = v;
          }
        dst[static_cast<std::int64_t>(y) * ow + xx] = m;
      }
  }
  return make_op(std::move(out), {x}, [n, c, h, w](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const int oh = h / 2, ow = w / 2;
    for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
      const double* src = p.value.data() + pl * h * w;
      const double* g = node.grad.data() + pl * oh * ow;
      double* gx = p.grad.data() + pl * h * w;
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
          // first strict max in scan order gets the gradient
          int by = 0, bx = 0;
          double m = src[static_cast<std::int64_t>(2 * y) * w + 2 * xx];
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              double v = src[(static_cast<std::int64_t>(2 * y + dy)) * w + 2 * xx + dx];
              if (v > m) {
                m = v;
                by = dy;
                bx = dx;
              }
            }
          gx[(static_cast<std::int64_t>(2 * y + by)) * w + 2 * xx + bx] += g[static_cast<std::int64_t>(y) * ow + xx];
        }
    }
  });
}

Var bilinear_upsample(const Var& x, int oh, int ow) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4 && oh >= 1 && ow >= 1, "bilinear_upsample: want NCHW");
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  // precompute interpolation taps (half-pixel centers)
  struct Tap {
    int i0, i1;
    double w0, w1;
  };
  auto make_taps = [](int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      if (src < 0) src = 0;
      if (src > in - 1) src = in - 1;
      int i0 = static_cast<int>(std::floor(src));
      int i1 = i0 + 1 < in ? i0 + 1 : in - 1;
      double f = src - i0;
      taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - f, f};
    }
    return taps;
  };
  auto ty = make_taps(h, oh);
  auto tx = make_taps(w, ow);
  Tensor out({n, c, oh, ow});
  for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
    const double* src = x->value.data() + pl * h * w;
    double* dst = out.data() + pl * oh * ow;
    for (int y = 0; y < oh; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      for (int xx = 0; xx < ow; ++xx) {
        const auto& bt = tx[static_cast<std::size_t>(xx)];
        dst[static_cast<std::int64_t>(y) * ow + xx] =
            a.w0 * (bt.w0 * src[static_cast<std::int64_t>(a.i0) * w + bt.i0] + bt.w1 * src[static_cast<std::int64_t>(a.i0) * w + bt.i1]) +
            a.w1 * (bt.w0 * src[static_cast<std::int64_t>(a.i1) * w + bt.i0] + bt.w1 * src[static_cast<std::int64_t>(a.i1) * w + bt.i1]);
      }
    }
  }
  return make_op(std::move(out), {x}, [n, c, h, w, oh, ow, ty, tx](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::int64_t pl = 0; pl < static_cast<std::int64_t>(n) * c; ++pl) {
      const double* g = node.grad.data() + pl * oh * ow;
      double* gx = p.grad.data() + pl * h * w;
      for (int y = 0; y < oh; ++y) {
        const auto& a = ty[static_cast<std::size_t>(y)];
        for (int xx = 0; xx < ow; ++xx) {
          const auto& bt = tx[static_cast<std::size_t>(xx)];
          const double gv = g[static_cast<std::int64_t>(y) * ow + xx];
          gx[static_cast<std::int64_t>(a.i0) * w + bt.i0] += a.w0 * bt.w0 * gv;
          gx[static_cast<std::int64_t>(a.i0) * w + bt.i1] += a.w0 * bt.w1 * gv;
          gx[static_cast<std::int64_t>(a.i1) * w + bt.i0] += a.w1 * bt.w0 * gv;
          gx[static_cast<std::int64_t>(a.i1) * w + bt.i1] += a.w1 * bt.w1 * gv;
        }
      }
    }
  });
}

Var site_normalize(const Var& x, double eps) {
  const auto& s = x->value.shape();
  POLC_CHECK(s.size() == 4, "site_normalize: want NCHW");
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  Tensor out(s);
  for (int bi = 0; bi < n; ++bi)
    for (std::int64_t i = 0; i < plane; ++i) {
      double nrm = 0;
      const std::int64_t base = static_cast<std::int64_t>(bi) * c * plane + i;
      for (int ci = 0; ci < c; ++ci) {
        double v = x->value[base + ci * plane];
        nrm += v * v;
      }
      nrm = std::sqrt(nrm) + eps;
      for (int ci = 0; ci < c; ++ci) out[base + ci * plane] = x->value[base + ci * plane] / nrm;
    }
  return make_op(std::move(out), {x}, [n, c, plane, eps](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int bi = 0; bi < n; ++bi)
      for (std::int64_t i = 0; i < plane; ++i) {
        const std::int64_t base = static_cast<std::int64_t>(bi) * c * plane + i;
        double nrm2 = 0;
        for (int ci = 0; ci < c; ++ci) {
          double v = p.value[base + ci * plane];
          nrm2 += v * v;
        }
        const double nrm = std::sqrt(nrm2) + eps;
        // y = x / nrm, d x_j = (g_j - y_j * (sum_k g_k x_k) / (nrm)) / nrm  with nrm = |x|+eps
        double gdotx = 0;
        for (int ci = 0; ci < c; ++ci) gdotx += node.grad[base + ci * plane] * p.value[base + ci * plane];
        const double denom = nrm * nrm * (std::sqrt(nrm2) > 0 ? std::sqrt(nrm2) : 1.0);
        for (int ci = 0; ci < c; ++ci) {
          const double xj = p.value[base + ci * plane];
          p.grad[base + ci * plane] += node.grad[base + ci * plane] / nrm - xj * gdotx / denom;
        }
      }
  });
}

Var cross_entropy_cls(const Var& logits, const std::vector<int>& labels) {
  const auto& s = logits->value.shape();
  POLC_CHECK(s.size() == 2, "cross_entropy_cls: want (N,K)");
  const int n = s[0], k = s[1];
  POLC_CHECK(static_cast<int>(labels.size()) == n, "cross_entropy_cls: label count");
  for (int lbl : labels) POLC_CHECK(lbl >= 0 && lbl < k, "cross_entropy_cls: label out of range");
  Tensor out({1});
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits->value.data() + static_cast<std::int64_t>(i) * k;
    double m = row[0];
    for (int j = 1; j < k; ++j) m = row[j] > m ? row[j] : m;
    double lse = 0;
    for (int j = 0; j < k; ++j) lse += std::exp(row[j] - m);
    lse = m + std::log(lse);
    total += lse - row[labels[static_cast<std::size_t>(i)]];
  }
  out[0] = total / n;
  return make_op(std::move(out), {logits}, [n, k, labels](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double gs = node.grad[0] / n;
    for (int i = 0; i < n; ++i) {
      const double* row = p.value.data() + static_cast<std::int64_t>(i) * k;
      double m = row[0];
      for (int j = 1; j < k; ++j) m = row[j] > m ? row[j] : m;
      double z = 0;
      for (int j = 0; j < k; ++j) z += std::exp(row[j] - m);
      double* grow = p.grad.data() + static_cast<std::int64_t>(i) * k;
      for (int j = 0; j < k; ++j) {
        double soft = std::exp(row[j] - m) / z;
        grow[j] += gs * (soft - (j == labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
      }
    }
  });
}

Var cross_entropy_seg(const Var& logits, const std::vector<int>& labels, int ignore) {
  const auto& s = logits->value.shape();
  POLC_CHECK(s.size() == 4, "cross_entropy_seg: want (N,K,H,W)");
  const int n = s[0], k = s[1], h = s[2], w = s[3];
  POLC_CHECK(static_cast<std::int64_t>(labels.size()) == static_cast<std::int64_t>(n) * h * w,
             "cross_entropy_seg: label count");
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::int64_t valid = 0;
  double total = 0;
  for (int bi = 0; bi < n; ++bi)
    for (std::int64_t i = 0; i < plane; ++i) {
      const int lbl = labels[static_cast<std::size_t>(bi * plane + i)];
      if (lbl == ignore) continue;
      POLC_CHECK(lbl >= 0 && lbl < k, "cross_entropy_seg: label out of range");
      const std::int64_t base = static_cast<std::int64_t>(bi) * k * plane + i;
      double m = logits->value[base];
      for (int j = 1; j < k; ++j) {
        double v = logits->value[base + j * plane];
        m = v > m ? v : m;
      }
      double z = 0;
      for (int j = 0; j < k; ++j) z += std::exp(logits->value[base + j * plane] - m);
      total += m + std::log(z) - logits->value[base + lbl * plane];
      ++valid;
    }
  POLC_CHECK_T(valid > 0, SpecError, "cross_entropy_seg: all pixels ignored");
  Tensor out({1});
  out[0] = total / static_cast<double>(valid);
  return make_op(std::move(out), {logits}, [n, k, plane, labels, ignore, valid](Node& node) {
    Node& p = *node.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double gs = node.grad[0] / static_cast<double>(valid);
    for (int bi = 0; bi < n; ++bi)
      for (std::int64_t i = 0; i < plane; ++i) {
        const int lbl = labels[static_cast<std::size_t>(bi * plane + i)];
        if (lbl == ignore) continue;
        const std::int64_t base = static_cast<std::int64_t>(bi) * k * plane + i;
        double m = p.value[base];
        for (int j = 1; j < k; ++j) {
          double v = p.value[base + j * plane];
          m = v > m ? v : m;
        }
        double z = 0;
        for (int j = 0; j < k; ++j) z += std::exp(p.value[base + j * plane] - m);
        for (int j = 0; j < k; ++j) {
          double soft = std::exp(p.value[base + j * plane] - m) / z;
          p.grad[base + j * plane] += gs * (soft - (j == lbl ? 1.0 : 0.0));
        }
      }
  });
}

Tensor t_add(const Tensor& a, const Tensor& b) {
  POLC_CHECK(a.same_shape(b), "t_add shape mismatch");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor t_sub(const Tensor& a, const Tensor& b) {
  POLC_CHECK(a.same_shape(b), "t_sub shape mismatch");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor t_clamp01(const Tensor& a) {
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a[i] < 0 ? 0.0 : (a[i] > 1 ? 1.0 : a[i]);
  return out;
}

Tensor t_round(const Tensor& a) {
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = std::round(a[i]);
  return out;
}

double t_mse(const Tensor& a, const Tensor& b) {
  POLC_CHECK(a.same_shape(b), "t_mse shape mismatch");
  double s = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace polc::ops
