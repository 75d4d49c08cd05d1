#pragma once

#include "polc/vision.hpp"

namespace polc::objectives {

struct LossWeights {
  double lambda_d = 1.0;
  double lambda_perc = 1.0;
  double lambda_rec = 1.0;
  double lambda_G = 0.8;
  double lambda_task = 1.0;
  double lambda_dist = 0.01;
  std::vector<double> stage_weights;  // distillation weights; empty = all ones
};

// Strided patch discriminator conditioned on the latent: the latent is
// nearest-upsampled to image resolution, projected to 16 channels and
// concatenated with the image. Outputs per-patch probabilities kept strictly
// inside (0,1) by a +-15 logit clamp.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(int latent_channels, int width, Rng& rng);
  Var forward(const Var& z_cond, const Var& x) const;  // (N,1,H/8,W/8) probabilities
  nn::ParamList params() const;                        // group "disc"
  void save_into(Checkpoint& ck, const std::string& prefix = "disc") const;
  static Discriminator load_from(const Checkpoint& ck, const std::string& prefix = "disc");
  int latent_channels() const { return cin_; }
  int width() const { return width_; }

 private:
  int cin_ = 0, width_ = 0;
  nn::Conv2d cproj_, c1_, c2_, c3_, c4_;
};

// mean[-log(1 - D(z_f, x_f))] + mean[-log D(z_r, x_r)], natural log. Callers
// pass detached generator outputs / latents; only D parameters take gradient.
Var disc_loss(const Discriminator& d, const Var& z_fake, const Var& x_fake, const Var& z_real,
              const Var& x_real);

// mean[-log D(z, x_hat)]; D parameters must be frozen by the caller so the
// gradient reaches only the coder.
Var gen_loss(const Discriminator& d, const Var& z, const Var& x_hat);

// LPIPS-style distance: per-site unit-normalized channel vectors of every
// stage of a frozen backbone; squared L2 per site, averaged over sites,
// summed over stages with equal weights.
Var perc_distance(const Var& x, const Var& x_hat, const vision::VisionModel& net);

// lambda_d * d(x,x_hat) + lambda_perc * perc. The distortion d is MSE in
// 8-bit amplitude units (values scaled by 255), the usual coder convention.
Var rec_loss(const Var& x, const Var& x_hat, const LossWeights& w, const vision::VisionModel* perc_net);

Var mse_255(const Var& x, const Var& x_hat);

// weighted totals with logged per-term breakdowns
struct EgpTerms {
  double rate = 0, rec = 0, gen = 0, disc = 0, total = 0;
};
Var egp_loss(const Var& rate_bpp, const Var& rec, const Var* gen, double lambda_rate,
             const LossWeights& w, EgpTerms* terms);

Var task_loss_cls(const Var& logits, const std::vector<int>& labels);
Var task_loss_seg(const Var& logits, const std::vector<int>& labels);  // ignore index 255

// sum_i w_i * MSE(student_i, teacher_i); teacher features are detached here,
// so no gradient can reach teacher parameters.
Var dist_loss(const std::vector<Var>& student, const std::vector<Var>& teacher,
              const std::vector<double>& stage_weights);

struct AdaptTerms {
  double rate = 0, task = 0, dist = 0, total = 0;
};
Var adapt_loss(const Var& rate_bpp, const Var& task, const Var& dist, double lambda_rate,
               const LossWeights& w, AdaptTerms* terms);

inline constexpr int kSegIgnoreIndex = 255;

}  // namespace polc::objectives
