#include "polc/objectives.hpp"

#include "polc/codec.hpp"

namespace polc::objectives {

namespace o = ops;

namespace {
constexpr double kLogitClamp = 15.0;
constexpr int kCondChannels = 16;
}  // namespace

Discriminator::Discriminator(int latent_channels, int width, Rng& rng)
    : cin_(latent_channels), width_(width) {
  cproj_ = nn::Conv2d(latent_channels, kCondChannels, 1, 1, 0, rng);
  c1_ = nn::Conv2d(3 + kCondChannels, width, 3, 2, 1, rng);
  c2_ = nn::Conv2d(width, 2 * width, 3, 2, 1, rng);
  c3_ = nn::Conv2d(2 * width, 4 * width, 3, 2, 1, rng);
  c4_ = nn::Conv2d(4 * width, 1, 3, 1, 1, rng);
}

Var Discriminator::forward(const Var& z_cond, const Var& x) const {
  POLC_CHECK(x->value.ndim() == 4 && x->value.dim(1) == 3, "discriminator: want (N,3,H,W) image");
  POLC_CHECK(z_cond->value.ndim() == 4 && z_cond->value.dim(1) == cin_, "discriminator: latent channels");
  POLC_CHECK(x->value.dim(2) == z_cond->value.dim(2) * kLatentDivisor &&
                 x->value.dim(3) == z_cond->value.dim(3) * kLatentDivisor,
             "discriminator: latent/image resolution mismatch");
  Var cond = cproj_.forward(o::nearest_upsample(z_cond, kLatentDivisor));
  Var t = o::concat_channels({x, cond});
  t = o::leaky_relu(c1_.forward(t), 0.2);
  t = o::leaky_relu(c2_.forward(t), 0.2);
  t = o::leaky_relu(c3_.forward(t), 0.2);
  return o::sigmoid_clamped(c4_.forward(t), kLogitClamp);
}

nn::ParamList Discriminator::params() const {
  nn::ParamList ps;
  cproj_.collect("disc.cproj", ps);
  c1_.collect("disc.c1", ps);
  c2_.collect("disc.c2", ps);
  c3_.collect("disc.c3", ps);
  c4_.collect("disc.c4", ps);
  return ps;
}

void Discriminator::save_into(Checkpoint& ck, const std::string& prefix) const {
  ck.meta[prefix + ".latent_channels"] = std::to_string(cin_);
  ck.meta[prefix + ".width"] = std::to_string(width_);
  for (const auto& p : params()) ck.tensors[prefix + "." + p.name] = p.v->value;
}

Discriminator Discriminator::load_from(const Checkpoint& ck, const std::string& prefix) {
  auto ci = ck.meta.find(prefix + ".latent_channels");
  auto wi = ck.meta.find(prefix + ".width");
  POLC_CHECK_T(ci != ck.meta.end() && wi != ck.meta.end(), IncompatError, "checkpoint lacks disc meta");
  Rng dummy(0);
  Discriminator d(std::stoi(ci->second), std::stoi(wi->second), dummy);
  for (auto& p : d.params()) {
    const Tensor& t = ck.get(prefix + "." + p.name);
    POLC_CHECK_T(t.same_shape(p.v->value), IncompatError, "disc tensor shape mismatch: " + p.name);
    p.v->value = t;
  }
  return d;
}

Var disc_loss(const Discriminator& d, const Var& z_fake, const Var& x_fake, const Var& z_real,
              const Var& x_real) {
  Var p_fake = d.forward(z_fake, x_fake);
  Var p_real = d.forward(z_real, x_real);
  Var fake_term = o::mean(o::mul_scalar(o::log_(o::sub(make_leaf(Tensor::full(p_fake->value.shape(), 1.0)), p_fake)), -1.0));
  Var real_term = o::mean(o::mul_scalar(o::log_(p_real), -1.0));
  return o::add(fake_term, real_term);
}

Var gen_loss(const Discriminator& d, const Var& z, const Var& x_hat) {
  Var p = d.forward(z, x_hat);
  return o::mean(o::mul_scalar(o::log_(p), -1.0));
}

Var perc_distance(const Var& x, const Var& x_hat, const vision::VisionModel& net) {
  POLC_CHECK_T(x->value.same_shape(x_hat->value), SpecError, "perc_distance: shape mismatch");
  auto fa = net.forward_full(x).taps;
  auto fb = net.forward_full(x_hat).taps;
  Var total;
  for (std::size_t s = 0; s < fa.size(); ++s) {
    Var da = o::site_normalize(fa[s], 1e-10);
    Var db = o::site_normalize(fb[s], 1e-10);
    const auto& sh = da->value.shape();
    const double sites = static_cast<double>(sh[0]) * sh[2] * sh[3];
    Var stage = o::mul_scalar(o::sum(o::square(o::sub(da, db))), 1.0 / sites);
    total = total ? o::add(total, stage) : stage;
  }
  return total;
}

Var mse_255(const Var& x, const Var& x_hat) { return o::mul_scalar(o::mse(x, x_hat), 255.0 * 255.0); }

Var rec_loss(const Var& x, const Var& x_hat, const LossWeights& w, const vision::VisionModel* perc_net) {
  Var d = o::mul_scalar(mse_255(x, x_hat), w.lambda_d);
  if (w.lambda_perc == 0.0) return d;
  POLC_CHECK_T(perc_net != nullptr, SpecError, "rec_loss: perceptual weight set but no feature network");
  return o::add(d, o::mul_scalar(perc_distance(x, x_hat, *perc_net), w.lambda_perc));
}

Var egp_loss(const Var& rate_bpp, const Var& rec, const Var* gen, double lambda_rate,
             const LossWeights& w, EgpTerms* terms) {
  Var total = o::add(o::mul_scalar(rate_bpp, lambda_rate), o::mul_scalar(rec, w.lambda_rec));
  if (gen) total = o::add(total, o::mul_scalar(*gen, w.lambda_G));
  if (terms) {
    terms->rate = rate_bpp->value[0];
    terms->rec = rec->value[0];
    terms->gen = gen ? (*gen)->value[0] : 0.0;
    terms->total = total->value[0];
  }
  return total;
}

Var task_loss_cls(const Var& logits, const std::vector<int>& labels) {
  return o::cross_entropy_cls(logits, labels);
}

Var task_loss_seg(const Var& logits, const std::vector<int>& labels) {
  return o::cross_entropy_seg(logits, labels, kSegIgnoreIndex);
}

Var dist_loss(const std::vector<Var>& student, const std::vector<Var>& teacher,
              const std::vector<double>& stage_weights) {
  POLC_CHECK_T(student.size() == teacher.size() && !student.empty(), SpecError,
               "dist_loss: stage count mismatch");
  Var total;
  for (std::size_t i = 0; i < student.size(); ++i) {
    POLC_CHECK_T(student[i]->value.same_shape(teacher[i]->value), SpecError,
                 "dist_loss: stage shape mismatch");
    const double wi = stage_weights.empty() ? 1.0 : stage_weights.at(i);
    Var stage = o::mul_scalar(o::mse(student[i], detach(teacher[i])), wi);
    total = total ? o::add(total, stage) : stage;
  }
  return total;
}

Var adapt_loss(const Var& rate_bpp, const Var& task, const Var& dist, double lambda_rate,
               const LossWeights& w, AdaptTerms* terms) {
  Var total = o::add(o::add(o::mul_scalar(rate_bpp, lambda_rate), o::mul_scalar(task, w.lambda_task)),
                     o::mul_scalar(dist, w.lambda_dist));
  if (terms) {
    terms->rate = rate_bpp->value[0];
    terms->task = task->value[0];
    terms->dist = dist->value[0];
    terms->total = total->value[0];
  }
  return total;
}

}  // namespace polc::objectives
