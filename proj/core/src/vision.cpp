#include "polc/vision.hpp"

#include <fstream>
#include <sstream>

namespace polc::vision {

namespace o = ops;

const char* family_name(Family f) {
  switch (f) {
    case Family::conv_stem:
      return "conv_stem";
    case Family::patch_stem:
      return "patch_stem";
    case Family::isotropic:
      return "isotropic";
    case Family::seg:
      return "seg";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "conv_stem") return Family::conv_stem;
  if (s == "patch_stem") return Family::patch_stem;
  if (s == "isotropic") return Family::isotropic;
  if (s == "seg") return Family::seg;
  throw SpecError("unknown vision family: " + s);
}

const std::vector<VisionConfig>& model_zoo() {
  static const std::vector<VisionConfig> zoo = {
      {Family::conv_stem, {32, 64, 128}, 3, 16, 10, 1},
      {Family::patch_stem, {32, 64, 128}, 3, 16, 10, 2},
      {Family::isotropic, {96}, 3, 16, 10, 3},
      {Family::seg, {32, 64, 128}, 3, 16, 6, 4},
  };
  return zoo;
}

VisionConfig zoo_config(int model_id) {
  for (const auto& c : model_zoo())
    if (c.model_id == model_id) return c;
  throw IncompatError("unknown model_id: " + std::to_string(model_id));
}

void write_zoo_manifest(const std::string& path) {
  std::ofstream os(path);
  POLC_CHECK_T(os.good(), IoError, "cannot write " + path);
  os << "# model zoo manifest: model_id bytes in .polc headers map to these configs\n";
  for (const auto& c : model_zoo()) {
    os << "model_id=" << c.model_id << " family=" << family_name(c.family) << " widths=";
    for (std::size_t i = 0; i < c.widths.size(); ++i) os << (i ? "," : "") << c.widths[i];
    os << " blocks_per_stage=" << c.blocks_per_stage << " iso_depth=" << c.iso_depth
       << " num_classes=" << c.num_classes << " stem_divisor=" << c.stem_divisor() << "\n";
  }
}

namespace {
bool hierarchical(Family f) { return f == Family::conv_stem || f == Family::patch_stem || f == Family::seg; }
nn::Act stage_act(Family f) { return f == Family::patch_stem ? nn::Act::gelu : nn::Act::relu; }
}  // namespace

VisionModel::VisionModel(VisionConfig cfg, Rng& rng) : cfg_(cfg) {
  POLC_CHECK_T(!cfg.widths.empty() && cfg.num_classes >= 2, SpecError, "bad vision config");
  const nn::Act act = stage_act(cfg.family);
  if (hierarchical(cfg.family)) {
    const int w1 = cfg.widths[0];
    if (cfg.family == Family::patch_stem) {
      stem_conv_ = nn::Conv2d(3, w1, 4, 4, 0, rng);
    } else {
      stem_conv_ = nn::Conv2d(3, w1, 3, 2, 1, rng);  // + max pool -> /4
    }
    stages_.resize(cfg.widths.size());
    for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
      if (s > 0) {
        if (cfg.family == Family::patch_stem)
          downsamples_.emplace_back(cfg.widths[s - 1], cfg.widths[s], 2, 2, 0, rng);
        else
          downsamples_.emplace_back(cfg.widths[s - 1], cfg.widths[s], 3, 2, 1, rng);
      }
      for (int b = 0; b < cfg.blocks_per_stage; ++b) stages_[s].emplace_back(cfg.widths[s], act, rng);
    }
    if (cfg.family == Family::seg) {
      const int w1b = cfg.widths.front(), w3 = cfg.widths.back();
      seg_gproj_ = nn::Linear(w3, w1b, rng);
      seg_fuse_ = nn::Conv2d(w1b + w3 + w1b, 64, 3, 1, 1, rng);
      seg_out_ = nn::Conv2d(64, cfg.num_classes, 1, 1, 0, rng);
    } else {
      head_ = nn::Linear(cfg.widths.back(), cfg.num_classes, rng);
    }
  } else {
    const int w = cfg.widths[0];
    POLC_CHECK_T(cfg.iso_depth % 4 == 0, SpecError, "isotropic depth must be a multiple of 4");
    stem_conv_ = nn::Conv2d(3, w, 16, 16, 0, rng);
    for (int b = 0; b < cfg.iso_depth; ++b) {
      iso_blocks_.emplace_back(w, nn::Act::gelu, rng);
      iso_mlp_a_.emplace_back(w, 4 * w, 1, 1, 0, rng);
      iso_mlp_b_.emplace_back(4 * w, w, 1, 1, 0, rng);
    }
    head_ = nn::Linear(w, cfg.num_classes, rng);
  }
}

Var VisionModel::stem(const Var& x) const {
  POLC_CHECK(x->value.ndim() == 4 && x->value.dim(1) == 3, "vision stem: want (N,3,H,W)");
  POLC_CHECK_T(x->value.dim(2) % cfg_.stem_divisor() == 0 && x->value.dim(3) % cfg_.stem_divisor() == 0,
               SpecError, "vision: input dims must be divisible by the stem divisor");
  if (cfg_.family == Family::patch_stem || cfg_.family == Family::isotropic) return stem_conv_.forward(x);
  return o::max_pool2(o::relu(stem_conv_.forward(x)));
}

VisionModel::Output VisionModel::forward_from_features(const Var& f1) const {
  POLC_CHECK_T(f1->value.ndim() == 4 && f1->value.dim(1) == cfg_.post_stem_channels(), IncompatError,
               "forward_from_features: post-stem channel mismatch");
  Output out;
  if (hierarchical(cfg_.family)) {
    const nn::Act act = stage_act(cfg_.family);
    Var t = f1;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      if (s > 0) t = nn::activate(act, downsamples_[s - 1].forward(t));
      for (const auto& rb : stages_[s]) t = rb.forward(t);
      out.taps.push_back(t);
    }
    if (cfg_.family == Family::seg) {
      const Var& fa = out.taps.front();  // /4
      const Var& fc = out.taps.back();   // /16
      const int h4 = fa->value.dim(2), w4 = fa->value.dim(3);
      Var up = o::bilinear_upsample(fc, h4, w4);
      Var g = o::broadcast_spatial(seg_gproj_.forward(o::avg_pool_global(fc)), h4, w4);
      Var fused = o::relu(seg_fuse_.forward(o::concat_channels({fa, up, g})));
      Var logits4 = seg_out_.forward(fused);
      out.pred = o::bilinear_upsample(logits4, 4 * h4, 4 * w4);
    } else {
      out.pred = head_.forward(o::avg_pool_global(out.taps.back()));
    }
  } else {
    Var t = f1;
    const int tap_every = cfg_.iso_depth / 4;
    for (int b = 0; b < cfg_.iso_depth; ++b) {
      t = iso_blocks_[static_cast<std::size_t>(b)].forward(t);
      Var m = iso_mlp_b_[static_cast<std::size_t>(b)].forward(
          o::gelu(iso_mlp_a_[static_cast<std::size_t>(b)].forward(t)));
      t = o::add(t, m);
      if ((b + 1) % tap_every == 0) out.taps.push_back(t);
    }
    out.pred = head_.forward(o::avg_pool_global(t));
  }
  return out;
}

VisionModel::Output VisionModel::forward_full(const Var& x) const { return forward_from_features(stem(x)); }

std::vector<std::pair<std::string, nn::ParamList>> VisionModel::groups() const {
  nn::ParamList stem_ps, trunk;
  stem_conv_.collect("stem.conv", stem_ps);
  if (hierarchical(cfg_.family)) {
    for (std::size_t s = 0; s < stages_.size(); ++s) {
      if (s > 0) downsamples_[s - 1].collect("trunk.ds" + std::to_string(s), trunk);
      for (std::size_t b = 0; b < stages_[s].size(); ++b)
        stages_[s][b].collect("trunk.s" + std::to_string(s + 1) + ".b" + std::to_string(b), trunk);
    }
    if (cfg_.family == Family::seg) {
      seg_gproj_.collect("trunk.seg.gproj", trunk);
      seg_fuse_.collect("trunk.seg.fuse", trunk);
      seg_out_.collect("trunk.seg.out", trunk);
    } else {
      head_.collect("trunk.head", trunk);
    }
  } else {
    for (std::size_t b = 0; b < iso_blocks_.size(); ++b) {
      iso_blocks_[b].collect("trunk.b" + std::to_string(b) + ".mix", trunk);
      iso_mlp_a_[b].collect("trunk.b" + std::to_string(b) + ".mlp1", trunk);
      iso_mlp_b_[b].collect("trunk.b" + std::to_string(b) + ".mlp2", trunk);
    }
    head_.collect("trunk.head", trunk);
  }
  return {{"stem", stem_ps}, {"trunk", trunk}};
}

nn::ParamList VisionModel::trunk_params() const {
  for (auto& [name, ps] : groups())
    if (name == "trunk") return ps;
  return {};
}

nn::ParamList VisionModel::all_params() const {
  nn::ParamList all;
  for (auto& [name, ps] : groups())
    for (auto& p : ps) all.push_back(p);
  return all;
}

std::vector<LayerDesc> VisionModel::layers(int image_h, int image_w) const {
  POLC_CHECK_T(image_h % cfg_.stem_divisor() == 0 && image_w % cfg_.stem_divisor() == 0, SpecError,
               "layers: dims not divisible by stem divisor");
  std::vector<LayerDesc> out;
  auto resblock = [&](int c, int h, int w) {
    out.push_back({LayerKind::conv, 3, c, c, h, w});
    out.push_back({LayerKind::act, 1, c, c, h, w});
    out.push_back({LayerKind::conv, 3, c, c, h, w});
  };
  if (hierarchical(cfg_.family)) {
    int h = image_h / 4, w = image_w / 4;
    if (cfg_.family == Family::patch_stem) {
      out.push_back({LayerKind::conv, 4, 3, cfg_.widths[0], h, w});
    } else {
      out.push_back({LayerKind::conv, 3, 3, cfg_.widths[0], image_h / 2, image_w / 2});
      out.push_back({LayerKind::act, 1, cfg_.widths[0], cfg_.widths[0], image_h / 2, image_w / 2});
      out.push_back({LayerKind::pool, 2, cfg_.widths[0], cfg_.widths[0], h, w});
    }
    for (std::size_t s = 0; s < cfg_.widths.size(); ++s) {
      if (s > 0) {
        h /= 2;
        w /= 2;
        out.push_back({LayerKind::conv, cfg_.family == Family::patch_stem ? 2 : 3, cfg_.widths[s - 1],
                       cfg_.widths[s], h, w});
        out.push_back({LayerKind::act, 1, cfg_.widths[s], cfg_.widths[s], h, w});
      }
      for (int b = 0; b < cfg_.blocks_per_stage; ++b) resblock(cfg_.widths[s], h, w);
    }
    if (cfg_.family == Family::seg) {
      const int h4 = image_h / 4, w4 = image_w / 4;
      const int w1 = cfg_.widths.front(), w3 = cfg_.widths.back();
      out.push_back({LayerKind::upsample, 1, w3, w3, h4, w4});
      out.push_back({LayerKind::pool, 1, w3, w3, 1, 1});
      out.push_back({LayerKind::linear, 1, w3, w1, 1, 1});
      out.push_back({LayerKind::concat, 1, w1 + w3 + w1, w1 + w3 + w1, h4, w4});
      out.push_back({LayerKind::conv, 3, w1 + w3 + w1, 64, h4, w4});
      out.push_back({LayerKind::act, 1, 64, 64, h4, w4});
      out.push_back({LayerKind::conv, 1, 64, cfg_.num_classes, h4, w4});
      out.push_back({LayerKind::upsample, 1, cfg_.num_classes, cfg_.num_classes, image_h, image_w});
    } else {
      out.push_back({LayerKind::pool, 1, cfg_.widths.back(), cfg_.widths.back(), 1, 1});
      out.push_back({LayerKind::linear, 1, cfg_.widths.back(), cfg_.num_classes, 1, 1});
    }
  } else {
    const int wdt = cfg_.widths[0];
    const int h = image_h / 16, w = image_w / 16;
    out.push_back({LayerKind::conv, 16, 3, wdt, h, w});
    for (int b = 0; b < cfg_.iso_depth; ++b) {
      resblock(wdt, h, w);
      out.push_back({LayerKind::conv, 1, wdt, 4 * wdt, h, w});
      out.push_back({LayerKind::act, 1, 4 * wdt, 4 * wdt, h, w});
      out.push_back({LayerKind::conv, 1, 4 * wdt, wdt, h, w});
    }
    out.push_back({LayerKind::pool, 1, wdt, wdt, 1, 1});
    out.push_back({LayerKind::linear, 1, wdt, cfg_.num_classes, 1, 1});
  }
  return out;
}

void VisionModel::save_into(Checkpoint& ck, const std::string& prefix) const {
  ck.meta[prefix + ".family"] = family_name(cfg_.family);
  std::ostringstream ws;
  for (std::size_t i = 0; i < cfg_.widths.size(); ++i) ws << (i ? "," : "") << cfg_.widths[i];
  ck.meta[prefix + ".widths"] = ws.str();
  ck.meta[prefix + ".blocks_per_stage"] = std::to_string(cfg_.blocks_per_stage);
  ck.meta[prefix + ".iso_depth"] = std::to_string(cfg_.iso_depth);
  ck.meta[prefix + ".num_classes"] = std::to_string(cfg_.num_classes);
  ck.meta[prefix + ".model_id"] = std::to_string(cfg_.model_id);
  for (const auto& [gname, ps] : groups())
    for (const auto& p : ps) ck.tensors[prefix + "." + p.name] = p.v->value;
}

VisionModel VisionModel::load_from(const Checkpoint& ck, const std::string& prefix) {
  auto need = [&](const std::string& k) {
    auto it = ck.meta.find(prefix + "." + k);
    POLC_CHECK_T(it != ck.meta.end(), IncompatError, "checkpoint lacks vision meta: " + k);
    return it->second;
  };
  VisionConfig cfg;
  cfg.family = family_from_name(need("family"));
  cfg.widths.clear();
  std::stringstream ws(need("widths"));
  for (std::string tok; std::getline(ws, tok, ',');) cfg.widths.push_back(std::stoi(tok));
  cfg.blocks_per_stage = std::stoi(need("blocks_per_stage"));
  cfg.iso_depth = std::stoi(need("iso_depth"));
  cfg.num_classes = std::stoi(need("num_classes"));
  cfg.model_id = std::stoi(need("model_id"));
  Rng dummy(0);
  VisionModel m(cfg, dummy);
  for (auto& [gname, ps] : m.groups())
    for (auto& p : ps) {
      const Tensor& t = ck.get(prefix + "." + p.name);
      POLC_CHECK_T(t.same_shape(p.v->value), IncompatError, "vision tensor shape mismatch: " + p.name);
      p.v->value = t;
    }
  return m;
}

}  // namespace polc::vision
