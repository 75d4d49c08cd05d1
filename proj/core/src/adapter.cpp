#include "polc/adapter.hpp"

namespace polc::adapter {

namespace o = ops;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::shuffle:
      return "shuffle";
    case Variant::tconv:
      return "tconv";
    case Variant::no_resblock:
      return "no_resblock";
  }
  return "?";
}

Variant variant_from_name(const std::string& s) {
  if (s == "shuffle") return Variant::shuffle;
  if (s == "tconv") return Variant::tconv;
  if (s == "no_resblock") return Variant::no_resblock;
  throw SpecError("unknown adapter variant: " + s);
}

std::int64_t expected_param_count(const AdapterSpec& s) {
  const std::int64_t c1 = s.c1, c2 = s.c2, r = s.r;
  const std::int64_t resblock = 2 * (9 * c2 * c2 + c2);
  switch (s.variant) {
    case Variant::shuffle:
      return c1 * (r * r * c2) + r * r * c2 + resblock;
    case Variant::no_resblock:
      return c1 * (r * r * c2) + r * r * c2;
    case Variant::tconv:
      return c1 * c2 * r * r + c2 + resblock;
  }
  return 0;
}

AdapterSpec infer_spec(const CodecConfig& codec_cfg, const vision::VisionConfig& vision_cfg, Variant variant) {
  const int div = vision_cfg.stem_divisor();
  POLC_CHECK_T(kLatentDivisor % div == 0, IncompatError,
               "unsupported pairing: latent divisor not an integer multiple of the stem divisor");
  AdapterSpec s;
  s.c1 = codec_cfg.latent_channels;
  s.c2 = vision_cfg.post_stem_channels();
  s.r = kLatentDivisor / div;
  s.variant = variant;
  return s;
}

Adapter::Adapter(AdapterSpec spec, Rng& rng) : spec_(spec) {
  POLC_CHECK_T(spec.c1 >= 1 && spec.c2 >= 1 && spec.r >= 1, SpecError, "bad adapter spec");
  if (spec.variant == Variant::tconv) {
    tconv_ = nn::TConvRR(spec.c1, spec.c2, spec.r, rng);
  } else {
    proj_ = nn::Conv2d(spec.c1, spec.r * spec.r * spec.c2, 1, 1, 0, rng);
  }
  if (spec.variant != Variant::no_resblock) res_ = nn::ResBlock(spec.c2, nn::Act::relu, rng);
}

Var Adapter::forward(const Var& z) const {
  POLC_CHECK_T(z->value.ndim() == 4 && z->value.dim(1) == spec_.c1, IncompatError,
               "adapter: latent channel mismatch");
  Var t;
  if (spec_.variant == Variant::tconv)
    t = tconv_.forward(z);
  else
    t = o::pixel_shuffle(proj_.forward(z), spec_.r);
  if (spec_.variant != Variant::no_resblock) t = res_.forward(t);
  return t;
}

nn::ParamList Adapter::params() const {
  nn::ParamList ps;
  if (spec_.variant == Variant::tconv)
    tconv_.collect("adapter.tconv", ps);
  else
    proj_.collect("adapter.proj", ps);
  if (spec_.variant != Variant::no_resblock) res_.collect("adapter.res", ps);
  return ps;
}

std::vector<vision::LayerDesc> Adapter::layers(int latent_h, int latent_w) const {
  using vision::LayerKind;
  std::vector<vision::LayerDesc> out;
  const int oh = latent_h * spec_.r, ow = latent_w * spec_.r;
  if (spec_.variant == Variant::tconv) {
    out.push_back({LayerKind::tconv, spec_.r, spec_.c1, spec_.c2, oh, ow});
  } else {
    out.push_back({LayerKind::conv, 1, spec_.c1, spec_.r * spec_.r * spec_.c2, latent_h, latent_w});
    out.push_back({LayerKind::shuffle, spec_.r, spec_.r * spec_.r * spec_.c2, spec_.c2, oh, ow});
  }
  if (spec_.variant != Variant::no_resblock) {
    out.push_back({LayerKind::conv, 3, spec_.c2, spec_.c2, oh, ow});
    out.push_back({LayerKind::act, 1, spec_.c2, spec_.c2, oh, ow});
    out.push_back({LayerKind::conv, 3, spec_.c2, spec_.c2, oh, ow});
  }
  return out;
}

void Adapter::save_into(Checkpoint& ck, const std::string& prefix) const {
  ck.meta[prefix + ".c1"] = std::to_string(spec_.c1);
  ck.meta[prefix + ".c2"] = std::to_string(spec_.c2);
  ck.meta[prefix + ".r"] = std::to_string(spec_.r);
  ck.meta[prefix + ".variant"] = variant_name(spec_.variant);
  for (const auto& p : params()) ck.tensors[prefix + "." + p.name] = p.v->value;
}

Adapter Adapter::load_from(const Checkpoint& ck, const std::string& prefix) {
  auto need = [&](const std::string& k) {
    auto it = ck.meta.find(prefix + "." + k);
    POLC_CHECK_T(it != ck.meta.end(), IncompatError, "checkpoint lacks adapter meta: " + k);
    return it->second;
  };
  AdapterSpec spec;
  spec.c1 = std::stoi(need("c1"));
  spec.c2 = std::stoi(need("c2"));
  spec.r = std::stoi(need("r"));
  spec.variant = variant_from_name(need("variant"));
  Rng dummy(0);
  Adapter a(spec, dummy);
  for (auto& p : a.params()) {
    const Tensor& t = ck.get(prefix + "." + p.name);
    POLC_CHECK_T(t.same_shape(p.v->value), IncompatError, "adapter tensor shape mismatch: " + p.name);
    p.v->value = t;
  }
  return a;
}

}  // namespace polc::adapter
