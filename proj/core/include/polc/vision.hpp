#pragma once

#include <optional>

#include "polc/checkpoint.hpp"
#include "polc/nn.hpp"

namespace polc::vision {

enum class Family { conv_stem, patch_stem, isotropic, seg };

const char* family_name(Family f);
Family family_from_name(const std::string& s);

// Layer descriptions drive the closed-form FLOP counter. Unknown kinds are a
// hard error there, so every builder must tag its layers.
enum class LayerKind { conv, linear, tconv, pool, act, shuffle, upsample, concat };
struct LayerDesc {
  LayerKind kind;
  int k = 1;        // kernel (conv/tconv)
  int cin = 0;
  int cout = 0;
  int out_h = 1;    // output sites; 1x1 for vector ops
  int out_w = 1;
};

struct VisionConfig {
  Family family = Family::conv_stem;
  std::vector<int> widths = {32, 64, 128};  // stage widths (hierarchical) / {width} (isotropic)
  int blocks_per_stage = 3;
  int iso_depth = 16;  // isotropic block count; taps every depth/4 blocks
  int num_classes = 10;
  int model_id = 1;

  int stem_divisor() const { return family == Family::isotropic ? 16 : 4; }
  int post_stem_channels() const { return widths.front(); }
  int stage_count() const { return family == Family::isotropic ? 4 : static_cast<int>(widths.size()); }
};

// Built-in zoo; model_id bytes in .polc headers refer to these entries.
const std::vector<VisionConfig>& model_zoo();
VisionConfig zoo_config(int model_id);
void write_zoo_manifest(const std::string& path);

// Desk-scale downstream model with per-stage feature taps. forward_full is
// exactly stem + forward_from_features, which makes the stem-bypass splice an
// identity by construction.
class VisionModel {
 public:
  struct Output {
    Var pred;               // (N,K) logits or (N,K,H,W) per-pixel logits
    std::vector<Var> taps;  // one per stage, in order
  };

  VisionModel() = default;
  VisionModel(VisionConfig cfg, Rng& rng);

  Var stem(const Var& x) const;
  Output forward_from_features(const Var& f1) const;
  Output forward_full(const Var& x) const;

  const VisionConfig& config() const { return cfg_; }

  // groups: "stem" and "trunk" (stages + head). Compressed-domain fine-tuning
  // never touches the stem (it is bypassed by the adapter).
  std::vector<std::pair<std::string, nn::ParamList>> groups() const;
  nn::ParamList trunk_params() const;
  nn::ParamList all_params() const;

  std::vector<LayerDesc> layers(int image_h, int image_w) const;

  void save_into(Checkpoint& ck, const std::string& prefix) const;
  static VisionModel load_from(const Checkpoint& ck, const std::string& prefix);

 private:
  VisionConfig cfg_;
  nn::Conv2d stem_conv_;
  std::vector<nn::Conv2d> downsamples_;          // between hierarchical stages
  std::vector<std::vector<nn::ResBlock>> stages_;  // hierarchical blocks
  std::vector<nn::ResBlock> iso_blocks_;
  std::vector<nn::Conv2d> iso_mlp_a_, iso_mlp_b_;  // 1x1 channel MLP per block
  nn::Linear head_;
  // segmentation head
  nn::Linear seg_gproj_;
  nn::Conv2d seg_fuse_, seg_out_;
};

}  // namespace polc::vision
