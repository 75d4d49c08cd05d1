#include "polc/codec.hpp"

#include <cmath>

namespace polc {

namespace o = ops;

RatePoint rate_point(int index) {
  POLC_CHECK_T(index >= 0 && index < kNumRatePoints, SpecError, "rate index must be in [0,7]");
  return {index, kRateLambdas[static_cast<std::size_t>(index)]};
}

Codec::Codec(CodecConfig cfg, Rng& rng) : cfg_(cfg) {
  POLC_CHECK_T(cfg.latent_channels > 0 && cfg.base_width > 0, SpecError, "bad codec config");
  POLC_CHECK_T(cfg.num_rate_points == kNumRatePoints, SpecError, "codec supports exactly 8 rate points");
  const int w = cfg.base_width, c = cfg.latent_channels;
  e1_ = nn::Conv2d(3, w, 3, 2, 1, rng);
  er1_ = nn::ResBlock(w, nn::Act::relu, rng);
  e2_ = nn::Conv2d(w, 2 * w, 3, 2, 1, rng);
  er2_ = nn::ResBlock(2 * w, nn::Act::relu, rng);
  e3_ = nn::Conv2d(2 * w, 4 * w, 3, 2, 1, rng);
  er3_ = nn::ResBlock(4 * w, nn::Act::relu, rng);
  e4_ = nn::Conv2d(4 * w, c, 3, 2, 1, rng);

  d1_ = nn::Conv2d(c, 4 * (4 * w), 3, 1, 1, rng);
  dr1_ = nn::ResBlock(4 * w, nn::Act::relu, rng);
  d2_ = nn::Conv2d(4 * w, 4 * (2 * w), 3, 1, 1, rng);
  dr2_ = nn::ResBlock(2 * w, nn::Act::relu, rng);
  d3_ = nn::Conv2d(2 * w, 4 * w, 3, 1, 1, rng);
  dr3_ = nn::ResBlock(w, nn::Act::relu, rng);
  d4_ = nn::Conv2d(w, 4 * 3, 3, 1, 1, rng);
  // temper the output head so early reconstructions start near mid-range
  for (std::int64_t i = 0; i < d4_.w->value.size(); ++i) d4_.w->value[i] *= 0.1;

  // geometric gain ladder, small gain (coarse) at index 0 / lambda 18;
  // stored (C, 8) so one rate point is a column
  Tensor lg({c, kNumRatePoints});
  Tensor lig({c, kNumRatePoints});
  for (int j = 0; j < kNumRatePoints; ++j) {
    const double g = 0.5 * std::pow(10.0, j / 7.0);
    for (int ci = 0; ci < c; ++ci) {
      lg.at({ci, j}) = std::log(g);
      lig.at({ci, j}) = -std::log(g);
    }
  }
  log_gain_ = nn::param(lg);
  log_inv_gain_ = nn::param(lig);
  prior_ = EntropyModel(c, rng);
}

Var Codec::analysis(const Var& x) const {
  POLC_CHECK(x->value.ndim() == 4 && x->value.dim(1) == 3, "analysis: want (N,3,H,W)");
  POLC_CHECK_T(x->value.dim(2) % kLatentDivisor == 0 && x->value.dim(3) % kLatentDivisor == 0, SpecError,
               "analysis: dims must be divisible by 16 (pad first)");
  Var t = er1_.forward(o::relu(e1_.forward(x)));
  t = er2_.forward(o::relu(e2_.forward(t)));
  t = er3_.forward(o::relu(e3_.forward(t)));
  return e4_.forward(t);
}

Var Codec::synthesis(const Var& z) const {
  POLC_CHECK(z->value.ndim() == 4 && z->value.dim(1) == cfg_.latent_channels, "synthesis: bad latent");
  ++synthesis_calls_;
  Var t = dr1_.forward(o::relu(o::pixel_shuffle(d1_.forward(z), 2)));
  t = dr2_.forward(o::relu(o::pixel_shuffle(d2_.forward(t), 2)));
  t = dr3_.forward(o::relu(o::pixel_shuffle(d3_.forward(t), 2)));
  return o::pixel_shuffle(d4_.forward(t), 2);
}

Var Codec::gain_vec(int rate_index) const {
  (void)rate_point(rate_index);
  return o::exp_(o::gather_column(log_gain_, rate_index));
}

Var Codec::inv_gain_vec(int rate_index) const {
  (void)rate_point(rate_index);
  return o::exp_(o::gather_column(log_inv_gain_, rate_index));
}

Var Codec::prior_inv_gain(int rate_index) const { return o::reciprocal(gain_vec(rate_index)); }

Var Codec::apply_gain(const Var& y, int rate_index) const { return o::channel_scale(y, gain_vec(rate_index)); }

Var Codec::apply_inv_gain(const Var& z, int rate_index) const {
  return o::channel_scale(z, inv_gain_vec(rate_index));
}

Var Codec::likelihood(const Var& z_gained, int rate_index) const {
  return prior_.mass(z_gained, prior_inv_gain(rate_index));
}

Var Codec::rate_bpp(const Var& z_gained, int rate_index, int image_h, int image_w) const {
  const int n = z_gained->value.dim(0);
  Var p = likelihood(z_gained, rate_index);
  Var bits = o::mul_scalar(o::sum(o::log_(p)), -1.0 / std::log(2.0));
  return o::mul_scalar(bits, 1.0 / (static_cast<double>(n) * image_h * image_w));
}

LatentCode Codec::encode(const ImageBuffer& x, const RatePoint& rp) const {
  POLC_CHECK_T(x.divisible_by(kLatentDivisor), SpecError,
               "encode: image dims must be divisible by 16 (pad first)");
  (void)rate_point(rp.index);
  Tensor batch = x.pix.reshaped({1, 3, x.height(), x.width()});
  Var y = apply_gain(analysis(make_leaf(batch)), rp.index);
  LatentCode out;
  out.values = y->value.reshaped({cfg_.latent_channels, x.height() / kLatentDivisor, x.width() / kLatentDivisor});
  out.rate_index = rp.index;
  out.quantized = false;
  return out;
}

LatentCode Codec::quantize(const LatentCode& y, QuantizeMode mode, Rng* noise_rng) const {
  POLC_CHECK_T(!y.quantized, SpecError, "quantize: latent already quantized");
  LatentCode out = y;
  if (mode == QuantizeMode::round) {
    out.values = ops::t_round(y.values);
    out.quantized = true;
  } else {
    POLC_CHECK_T(noise_rng != nullptr, SpecError, "quantize(noise): rng required");
    for (std::int64_t i = 0; i < out.values.size(); ++i) out.values[i] = y.values[i] + noise_rng->uniform(-0.5, 0.5);
    out.quantized = false;
  }
  return out;
}

ImageBuffer Codec::decode(const LatentCode& z, const RatePoint& rp) const {
  POLC_CHECK_T(rp.index == z.rate_index, IncompatError, "decode: rate point mismatch");
  Tensor batch = z.values.reshaped({1, z.channels(), z.h(), z.w()});
  Var xh = synthesis(apply_inv_gain(make_leaf(batch), rp.index));
  ImageBuffer out(ops::t_clamp01(xh->value.reshaped({3, z.h() * kLatentDivisor, z.w() * kLatentDivisor})));
  return out;
}

Tensor Codec::likelihoods(const LatentCode& z) const {
  Tensor batch = z.values.reshaped({1, z.channels(), z.h(), z.w()});
  Var p = likelihood(make_leaf(batch), z.rate_index);
  return p->value.reshaped({z.channels(), z.h(), z.w()});
}

std::pair<double, double> Codec::estimate_rate(const LatentCode& z, int image_h, int image_w) const {
  Tensor p = likelihoods(z);
  double bits = 0;
  for (std::int64_t i = 0; i < p.size(); ++i) bits -= std::log2(p[i]);
  return {bits, bits / (static_cast<double>(image_h) * image_w)};
}

Tensor Codec::gain_vector(int rate_index) const {
  Var g = gain_vec(rate_index);
  return g->value;
}

std::vector<std::pair<std::string, nn::ParamList>> Codec::groups() const {
  nn::ParamList enc, dec, prior, gains;
  e1_.collect("enc.s1", enc);
  er1_.collect("enc.r1", enc);
  e2_.collect("enc.s2", enc);
  er2_.collect("enc.r2", enc);
  e3_.collect("enc.s3", enc);
  er3_.collect("enc.r3", enc);
  e4_.collect("enc.s4", enc);
  d1_.collect("dec.u1", dec);
  dr1_.collect("dec.r1", dec);
  d2_.collect("dec.u2", dec);
  dr2_.collect("dec.r2", dec);
  d3_.collect("dec.u3", dec);
  dr3_.collect("dec.r3", dec);
  d4_.collect("dec.u4", dec);
  prior_.collect("prior", prior);
  gains.push_back({"gains.log_gain", log_gain_});
  gains.push_back({"gains.log_inv_gain", log_inv_gain_});
  return {{"enc", enc}, {"dec", dec}, {"prior", prior}, {"gains", gains}};
}

nn::ParamList Codec::all_params() const {
  nn::ParamList all;
  for (auto& [name, ps] : groups())
    for (auto& p : ps) all.push_back(p);
  return all;
}

void Codec::save_into(Checkpoint& ck, const std::string& prefix) const {
  ck.meta[prefix + ".latent_channels"] = std::to_string(cfg_.latent_channels);
  ck.meta[prefix + ".base_width"] = std::to_string(cfg_.base_width);
  for (const auto& [gname, ps] : groups())
    for (const auto& p : ps) ck.tensors[prefix + "." + p.name] = p.v->value;
}

Codec Codec::load_from(const Checkpoint& ck, const std::string& prefix) {
  CodecConfig cfg;
  auto mi = ck.meta.find(prefix + ".latent_channels");
  auto bi = ck.meta.find(prefix + ".base_width");
  POLC_CHECK_T(mi != ck.meta.end() && bi != ck.meta.end(), IncompatError, "checkpoint lacks codec config");
  cfg.latent_channels = std::stoi(mi->second);
  cfg.base_width = std::stoi(bi->second);
  Rng dummy(0);
  Codec c(cfg, dummy);
  for (auto& [gname, ps] : c.groups())
    for (auto& p : ps) {
      const Tensor& t = ck.get(prefix + "." + p.name);
      POLC_CHECK_T(t.same_shape(p.v->value), IncompatError, "codec tensor shape mismatch: " + p.name);
      p.v->value = t;
    }
  return c;
}

}  // namespace polc
