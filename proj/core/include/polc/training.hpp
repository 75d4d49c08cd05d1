#pragma once

#include "polc/adapter.hpp"
#include "polc/bitstream.hpp"
#include "polc/datasets.hpp"
#include "polc/objectives.hpp"

namespace polc::train {

struct TrainConfig {
  std::string stage = "codec";  // teacher | codec | adapter
  std::string mode = "polc";    // codec stage: polc | mse
  std::int64_t steps = 150000;  // desk-scale defaults; 25000 for adapter stage
  int batch_size = 8;
  double lr_init = 1e-4;
  double lr_final = 1e-5;
  double decay_start_frac = 0.75;
  std::string lr_shape = "linear";  // linear | cosine
  std::uint64_t seed = 1;
  std::int64_t eval_every = 2000;
  std::int64_t ckpt_every = 10000;
  std::int64_t hash_check_every = 500;
  std::string run_dir;
  std::string resume_from;

  // data: "synth:cls", "synth:seg", or a directory of images
  std::string data = "synth:cls";
  int corpus_n = 800;
  int eval_n = 64;
  int patch = 64;
  bool augment = true;

  // codec stage
  CodecConfig codec;
  int disc_width = 48;
  std::string teacher_ckpt;  // perceptual backbone (polc mode) / distillation teacher

  // teacher / adapter stage
  int model_id = 1;
  std::vector<int> vision_widths;  // empty = zoo default for model_id
  int vision_blocks = 0;           // 0 = zoo default
  std::string codec_ckpt;
  std::string adapter_variant = "shuffle";
  bool full_ft = false;
  double lambda_dist = -1.0;  // <0 = family default (0.01 hier / 0.1 iso / 10 seg)
  int eval_rate_index = 3;

  objectives::LossWeights weights;
};

// linear warm value until decay_start_frac*T, then interpolation to lr_final
double lr_at(std::int64_t step, const TrainConfig& cfg);

// key=value round-trip of every field above (config.txt schema)
std::map<std::string, std::string> config_to_kv(const TrainConfig& cfg);
TrainConfig config_from_kv(const std::map<std::string, std::string>& kv);
// overlay only the keys present in kv
void config_apply_kv(TrainConfig& cfg, const std::map<std::string, std::string>& kv);

struct RunSummary {
  std::string final_ckpt;
  std::int64_t steps_run = 0;
  double last_total = 0;
  std::map<std::string, std::uint64_t> frozen_hashes_begin, frozen_hashes_end;
  bool frozen_ok = true;
  bool frozen_grads_zero = true;
};

RunSummary train_teacher(const TrainConfig& cfg);
RunSummary train_codec(const TrainConfig& cfg);
RunSummary train_adapter(const TrainConfig& cfg);

// resolved vision config for a run (zoo defaults + overrides)
vision::VisionConfig resolve_vision(const TrainConfig& cfg);
vision::VisionConfig resolve_vision(int model_id, const std::vector<int>& widths, int blocks);

double default_lambda_dist(vision::Family f);

// deterministic sub-seed derivation (also used by tests to regenerate corpora)
std::uint64_t splitmix_seed(std::uint64_t master, std::uint64_t stream);

// the per-step rate-point sampler used by both training stages
Rng lambda_stream(std::uint64_t master_seed);
int sample_rate_index(Rng& lambda_rng);

}  // namespace polc::train
