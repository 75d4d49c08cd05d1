#pragma once

#include <array>
#include <utility>

#include "polc/checkpoint.hpp"
#include "polc/entropy_model.hpp"
#include "polc/image.hpp"

namespace polc {

// The eight operating points; index 0 carries the largest rate penalty
// (lowest bitrate) and index 7 the smallest.
inline constexpr std::array<double, 8> kRateLambdas = {18.0, 9.32, 4.83, 2.5, 1.3, 0.67, 0.35, 0.18};
inline constexpr int kNumRatePoints = 8;
inline constexpr int kLatentDivisor = 16;

struct RatePoint {
  int index = 0;
  double lambda_rate = kRateLambdas[0];
};
RatePoint rate_point(int index);

struct CodecConfig {
  int latent_channels = 64;
  int base_width = 48;
  int num_rate_points = kNumRatePoints;
};

// Gained latent tensor. `values` is (C,h,w); integers iff quantized.
struct LatentCode {
  Tensor values;
  int rate_index = 0;
  bool quantized = false;

  int channels() const { return values.dim(0); }
  int h() const { return values.dim(1); }
  int w() const { return values.dim(2); }
};

enum class QuantizeMode { noise, round };

// Miniature learned coder: four stride-2 analysis stages (w,2w,4w,C channels),
// a mirrored subpixel-conv synthesis, per-rate-point channel gains, and the
// factorized entropy model.
class Codec {
 public:
  Codec() = default;
  Codec(CodecConfig cfg, Rng& rng);

  // -- batched autodiff paths (N,3,H,W) / (N,C,h,w) --
  Var analysis(const Var& x) const;   // gain not applied
  Var synthesis(const Var& z) const;  // expects inverse-gained latent; unclamped output
  Var gain_vec(int rate_index) const;
  Var inv_gain_vec(int rate_index) const;
  Var prior_inv_gain(int rate_index) const;  // 1/gain used by the entropy model
  Var apply_gain(const Var& y, int rate_index) const;
  Var apply_inv_gain(const Var& z, int rate_index) const;
  Var likelihood(const Var& z_gained, int rate_index) const;
  // mean over batch of bits-per-pixel for an (N,C,h,w) gained latent
  Var rate_bpp(const Var& z_gained, int rate_index, int image_h, int image_w) const;

  // -- single-image convenience API --
  LatentCode encode(const ImageBuffer& x, const RatePoint& rp) const;
  LatentCode quantize(const LatentCode& y, QuantizeMode mode, Rng* noise_rng = nullptr) const;
  ImageBuffer decode(const LatentCode& z, const RatePoint& rp) const;
  Tensor likelihoods(const LatentCode& z) const;
  // (total bits, bpp) from the entropy model
  std::pair<double, double> estimate_rate(const LatentCode& z, int image_h, int image_w) const;

  Tensor gain_vector(int rate_index) const;

  const CodecConfig& config() const { return cfg_; }
  const EntropyModel& entropy() const { return prior_; }

  // named parameter groups: "enc", "dec", "prior", "gains"
  std::vector<std::pair<std::string, nn::ParamList>> groups() const;
  nn::ParamList all_params() const;

  // number of synthesis-transform invocations since construction/load;
  // compressed-domain inference must leave this untouched
  std::int64_t synthesis_calls() const { return synthesis_calls_; }

  void save_into(Checkpoint& ck, const std::string& prefix = "codec") const;
  static Codec load_from(const Checkpoint& ck, const std::string& prefix = "codec");

 private:
  CodecConfig cfg_;
  nn::Conv2d e1_, e2_, e3_, e4_;
  nn::ResBlock er1_, er2_, er3_;
  nn::Conv2d d1_, d2_, d3_, d4_;
  nn::ResBlock dr1_, dr2_, dr3_;
  Var log_gain_;      // (C,8), one column per rate point
  Var log_inv_gain_;  // (C,8)
  EntropyModel prior_;
  mutable std::int64_t synthesis_calls_ = 0;
};

}  // namespace polc
