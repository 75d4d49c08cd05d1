#pragma once

#include "polc/codec.hpp"
#include "polc/vision.hpp"

namespace polc::adapter {

enum class Variant { shuffle, tconv, no_resblock };
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct AdapterSpec {
  int c1 = 0;  // latent channels in
  int c2 = 0;  // post-stem channels out
  int r = 1;   // per-dimension upsampling factor
  Variant variant = Variant::shuffle;
};

// Closed-form learnable-scalar counts; tests walk the constructed tensors to
// verify these independently.
std::int64_t expected_param_count(const AdapterSpec& spec);

// Pairs a codec with a downstream model: r is the ratio between the latent
// divisor (16) and the model's post-stem divisor, c2 its post-stem width.
AdapterSpec infer_spec(const CodecConfig& codec_cfg, const vision::VisionConfig& vision_cfg,
                       Variant variant = Variant::shuffle);

// Channel projection -> pixel shuffle -> residual block. The tconv variant
// swaps projection+shuffle for one transposed conv (kernel r, stride r);
// no_resblock drops the residual mapping.
class Adapter {
 public:
  Adapter() = default;
  Adapter(AdapterSpec spec, Rng& rng);

  Var forward(const Var& z) const;  // (N,c1,h,w) -> (N,c2,r*h,r*w)

  const AdapterSpec& spec() const { return spec_; }
  nn::ParamList params() const;  // group "adapter"
  std::vector<vision::LayerDesc> layers(int latent_h, int latent_w) const;

  void save_into(Checkpoint& ck, const std::string& prefix = "adapter") const;
  static Adapter load_from(const Checkpoint& ck, const std::string& prefix = "adapter");

 private:
  AdapterSpec spec_;
  nn::Conv2d proj_;
  nn::TConvRR tconv_;
  nn::ResBlock res_;
};

}  // namespace polc::adapter
