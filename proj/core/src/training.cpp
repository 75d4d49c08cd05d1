#include "polc/training.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace polc::train {

namespace o = ops;
namespace fs = std::filesystem;

std::uint64_t splitmix_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t x = master ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  return splitmix64(x);
}

namespace {

// rng stream tags fanned out from the master seed
enum Stream : std::uint64_t {
  kStreamCodecInit = 1,
  kStreamDiscInit = 2,
  kStreamVisionInit = 3,
  kStreamAdapterInit = 4,
  kStreamData = 5,
  kStreamNoise = 6,
  kStreamLambda = 7,
  kStreamTrainSet = 8,
  kStreamEvalSet = 9,
};

Tensor rng_to_tensor(const Rng& rng) {
  Tensor t({4});
  auto st = rng.state();
  std::memcpy(t.data(), st.data(), 32);  // raw bit pattern; never used as numbers
  return t;
}

Rng rng_from_tensor(const Tensor& t) {
  POLC_CHECK(t.size() == 4, "bad rng state tensor");
  std::array<std::uint64_t, 4> st;
  std::memcpy(st.data(), t.data(), 32);
  Rng r;
  r.set_state(st);
  return r;
}

void ensure_run_dir(const std::string& dir) {
  POLC_CHECK_T(!dir.empty(), SpecError, "run_dir is required");
  fs::create_directories(dir);
}

void write_config_file(const TrainConfig& cfg) {
  auto kv = config_to_kv(cfg);
  kv["polc_version"] = "0.1.0";
  std::ofstream os(cfg.run_dir + "/config.txt");
  POLC_CHECK_T(os.good(), IoError, "cannot write config.txt");
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

struct CsvLog {
  std::ofstream os;
  void open(const std::string& path, const std::string& header, bool append) {
    const bool exists = fs::exists(path);
    os.open(path, append ? std::ios::app : std::ios::out);
    POLC_CHECK_T(os.good(), IoError, "cannot open log " + path);
    if (!append || !exists) os << header << "\n";
  }
};

struct Corpus {
  std::vector<data::Sample> train, eval;
  bool segmentation = false;
};

Corpus load_corpus(const TrainConfig& cfg, bool labeled) {
  Corpus c;
  if (cfg.data == "synth:cls") {
    c.train = data::synth_shapes(cfg.corpus_n, "cls", splitmix_seed(cfg.seed, kStreamTrainSet));
    c.eval = data::synth_shapes(cfg.eval_n, "cls", splitmix_seed(cfg.seed, kStreamEvalSet));
  } else if (cfg.data == "synth:seg") {
    c.train = data::synth_shapes(cfg.corpus_n, "seg", splitmix_seed(cfg.seed, kStreamTrainSet));
    c.eval = data::synth_shapes(cfg.eval_n, "seg", splitmix_seed(cfg.seed, kStreamEvalSet));
    c.segmentation = true;
  } else {
    POLC_CHECK_T(!labeled, SpecError, "labeled stages need a synthetic corpus (synth:cls or synth:seg)");
    data::FolderStream stream(cfg.data, cfg.patch, false, cfg.seed);
    // materialize one epoch; training then crops patches from these images
    for (std::size_t i = 0; i < stream.images_per_epoch(); ++i) c.train.push_back(stream.next());
    const std::size_t ne = std::min<std::size_t>(static_cast<std::size_t>(cfg.eval_n), c.train.size() / 4 + 1);
    c.eval.assign(c.train.end() - static_cast<std::ptrdiff_t>(ne), c.train.end());
    c.train.resize(c.train.size() - ne);
    POLC_CHECK_T(!c.train.empty(), IoError, "folder corpus too small");
  }
  return c;
}

struct Batch {
  Tensor images;            // (N,3,H,W)
  std::vector<int> labels;  // classification
  std::vector<int> masks;   // segmentation, flattened (N*H*W)
};

Batch draw_batch(const Corpus& c, const TrainConfig& cfg, Rng& data_rng, bool labeled, bool crop_patch) {
  Batch b;
  std::vector<ImageBuffer> imgs;
  for (int i = 0; i < cfg.batch_size; ++i) {
    const auto& s = c.train[data_rng.uniform_int(c.train.size())];
    if (crop_patch) {
      imgs.push_back(data::random_patch(s.image, cfg.patch, cfg.augment, data_rng));
    } else {
      const bool flip = cfg.augment && data_rng.uniform() < 0.5;
      if (!flip) {
        imgs.push_back(s.image);
        if (labeled && c.segmentation) b.masks.insert(b.masks.end(), s.mask.begin(), s.mask.end());
      } else {
        const int h = s.image.height(), w = s.image.width();
        ImageBuffer f(h, w);
        const std::int64_t plane = static_cast<std::int64_t>(h) * w;
        for (int ch = 0; ch < 3; ++ch)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
              f.pix[ch * plane + static_cast<std::int64_t>(y) * w + x] =
                  s.image.pix[ch * plane + static_cast<std::int64_t>(y) * w + (w - 1 - x)];
        imgs.push_back(std::move(f));
        if (labeled && c.segmentation)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) b.masks.push_back(s.mask[static_cast<std::size_t>(y) * w + (w - 1 - x)]);
      }
    }
    if (labeled && !c.segmentation) b.labels.push_back(s.label);
  }
  b.images = stack_images(imgs);
  return b;
}

Tensor noise_like(const std::vector<int>& shape, Rng& rng) {
  Tensor u(shape);
  for (std::int64_t i = 0; i < u.size(); ++i) u[i] = rng.uniform(-0.5, 0.5);
  return u;
}

double task_accuracy(const Var& logits, const std::vector<int>& labels) {
  const int n = logits->value.dim(0), k = logits->value.dim(1);
  int hit = 0;
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    double best = logits->value[static_cast<std::int64_t>(i) * k];
    for (int j = 1; j < k; ++j) {
      const double v = logits->value[static_cast<std::int64_t>(i) * k + j];
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    if (arg == labels[static_cast<std::size_t>(i)]) ++hit;
  }
  return static_cast<double>(hit) / n;
}

double seg_miou_from_logits(const Var& logits, const std::vector<int>& masks, int num_classes) {
  const int n = logits->value.dim(0), k = logits->value.dim(1);
  const int h = logits->value.dim(2), w = logits->value.dim(3);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<std::int64_t> inter(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> uni(static_cast<std::size_t>(num_classes), 0);
  std::vector<bool> present(static_cast<std::size_t>(num_classes), false);
  for (int bi = 0; bi < n; ++bi)
    for (std::int64_t px = 0; px < plane; ++px) {
      const int lbl = masks[static_cast<std::size_t>(bi * plane + px)];
      if (lbl == objectives::kSegIgnoreIndex) continue;
      int arg = 0;
      double best = logits->value[(static_cast<std::int64_t>(bi) * k) * plane + px];
      for (int j = 1; j < k; ++j) {
        const double v = logits->value[(static_cast<std::int64_t>(bi) * k + j) * plane + px];
        if (v > best) {
          best = v;
          arg = j;
        }
      }
      present[static_cast<std::size_t>(lbl)] = true;
      if (arg == lbl) {
        ++inter[static_cast<std::size_t>(lbl)];
        ++uni[static_cast<std::size_t>(lbl)];
      } else {
        ++uni[static_cast<std::size_t>(lbl)];
        if (arg >= 0 && arg < num_classes) ++uni[static_cast<std::size_t>(arg)];
      }
    }
  double sum = 0;
  int cnt = 0;
  for (int cl = 0; cl < num_classes; ++cl)
    if (present[static_cast<std::size_t>(cl)]) {
      sum += uni[static_cast<std::size_t>(cl)] > 0
                 ? static_cast<double>(inter[static_cast<std::size_t>(cl)]) /
                       static_cast<double>(uni[static_cast<std::size_t>(cl)])
                 : 0.0;
      ++cnt;
    }
  return cnt ? sum / cnt : 0.0;
}

}  // namespace

Rng lambda_stream(std::uint64_t master_seed) { return Rng::stream(master_seed, kStreamLambda); }

int sample_rate_index(Rng& lambda_rng) { return static_cast<int>(lambda_rng.uniform_int(kNumRatePoints)); }

double lr_at(std::int64_t step, const TrainConfig& cfg) {
  const double t0 = cfg.decay_start_frac * static_cast<double>(cfg.steps);
  if (step <= static_cast<std::int64_t>(t0)) return cfg.lr_init;
  if (step >= cfg.steps) return cfg.lr_final;
  const double f = (static_cast<double>(step) - t0) / (static_cast<double>(cfg.steps) - t0);
  if (cfg.lr_shape == "cosine")
    return cfg.lr_final + (cfg.lr_init - cfg.lr_final) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * f));
  return cfg.lr_init + (cfg.lr_final - cfg.lr_init) * f;
}

std::map<std::string, std::string> config_to_kv(const TrainConfig& c) {
  std::map<std::string, std::string> kv;
  auto put = [&](const std::string& k, const std::string& v) { kv[k] = v; };
  auto putd = [&](const std::string& k, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    kv[k] = os.str();
  };
  put("stage", c.stage);
  put("mode", c.mode);
  put("steps", std::to_string(c.steps));
  put("batch_size", std::to_string(c.batch_size));
  putd("lr_init", c.lr_init);
  putd("lr_final", c.lr_final);
  putd("decay_start_frac", c.decay_start_frac);
  put("lr_shape", c.lr_shape);
  put("seed", std::to_string(c.seed));
  put("eval_every", std::to_string(c.eval_every));
  put("ckpt_every", std::to_string(c.ckpt_every));
  put("hash_check_every", std::to_string(c.hash_check_every));
  put("run_dir", c.run_dir);
  put("resume_from", c.resume_from);
  put("data", c.data);
  put("corpus_n", std::to_string(c.corpus_n));
  put("eval_n", std::to_string(c.eval_n));
  put("patch", std::to_string(c.patch));
  put("augment", c.augment ? "1" : "0");
  put("latent_channels", std::to_string(c.codec.latent_channels));
  put("base_width", std::to_string(c.codec.base_width));
  put("disc_width", std::to_string(c.disc_width));
  put("teacher_ckpt", c.teacher_ckpt);
  put("model_id", std::to_string(c.model_id));
  {
    std::ostringstream os;
    for (std::size_t i = 0; i < c.vision_widths.size(); ++i) os << (i ? "," : "") << c.vision_widths[i];
    put("vision_widths", os.str());
  }
  put("vision_blocks", std::to_string(c.vision_blocks));
  put("codec_ckpt", c.codec_ckpt);
  put("adapter_variant", c.adapter_variant);
  put("full_ft", c.full_ft ? "1" : "0");
  putd("lambda_dist", c.lambda_dist);
  put("eval_rate_index", std::to_string(c.eval_rate_index));
  putd("lambda_d", c.weights.lambda_d);
  putd("lambda_perc", c.weights.lambda_perc);
  putd("lambda_rec", c.weights.lambda_rec);
  putd("lambda_G", c.weights.lambda_G);
  putd("lambda_task", c.weights.lambda_task);
  return kv;
}

TrainConfig config_from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  config_apply_kv(c, kv);
  return c;
}

void config_apply_kv(TrainConfig& c, const std::map<std::string, std::string>& kv) {
  auto get = [&](const char* k, auto&& setter) {
    auto it = kv.find(k);
    if (it != kv.end() && !it->second.empty()) setter(it->second);
  };
  get("stage", [&](const std::string& v) { c.stage = v; });
  get("mode", [&](const std::string& v) { c.mode = v; });
  get("steps", [&](const std::string& v) { c.steps = std::stoll(v); });
  get("batch_size", [&](const std::string& v) { c.batch_size = std::stoi(v); });
  get("lr_init", [&](const std::string& v) { c.lr_init = std::stod(v); });
  get("lr_final", [&](const std::string& v) { c.lr_final = std::stod(v); });
  get("decay_start_frac", [&](const std::string& v) { c.decay_start_frac = std::stod(v); });
  get("lr_shape", [&](const std::string& v) { c.lr_shape = v; });
  get("seed", [&](const std::string& v) { c.seed = std::stoull(v); });
  get("eval_every", [&](const std::string& v) { c.eval_every = std::stoll(v); });
  get("ckpt_every", [&](const std::string& v) { c.ckpt_every = std::stoll(v); });
  get("hash_check_every", [&](const std::string& v) { c.hash_check_every = std::stoll(v); });
  get("run_dir", [&](const std::string& v) { c.run_dir = v; });
  get("resume_from", [&](const std::string& v) { c.resume_from = v; });
  get("data", [&](const std::string& v) { c.data = v; });
  get("corpus_n", [&](const std::string& v) { c.corpus_n = std::stoi(v); });
  get("eval_n", [&](const std::string& v) { c.eval_n = std::stoi(v); });
  get("patch", [&](const std::string& v) { c.patch = std::stoi(v); });
  get("augment", [&](const std::string& v) { c.augment = v == "1"; });
  get("latent_channels", [&](const std::string& v) { c.codec.latent_channels = std::stoi(v); });
  get("base_width", [&](const std::string& v) { c.codec.base_width = std::stoi(v); });
  get("disc_width", [&](const std::string& v) { c.disc_width = std::stoi(v); });
  get("teacher_ckpt", [&](const std::string& v) { c.teacher_ckpt = v; });
  get("model_id", [&](const std::string& v) { c.model_id = std::stoi(v); });
  get("vision_widths", [&](const std::string& v) {
    c.vision_widths.clear();
    std::stringstream ss(v);
    for (std::string tok; std::getline(ss, tok, ',');) c.vision_widths.push_back(std::stoi(tok));
  });
  get("vision_blocks", [&](const std::string& v) { c.vision_blocks = std::stoi(v); });
  get("codec_ckpt", [&](const std::string& v) { c.codec_ckpt = v; });
  get("adapter_variant", [&](const std::string& v) { c.adapter_variant = v; });
  get("full_ft", [&](const std::string& v) { c.full_ft = v == "1"; });
  get("lambda_dist", [&](const std::string& v) { c.lambda_dist = std::stod(v); });
  get("eval_rate_index", [&](const std::string& v) { c.eval_rate_index = std::stoi(v); });
  get("lambda_d", [&](const std::string& v) { c.weights.lambda_d = std::stod(v); });
  get("lambda_perc", [&](const std::string& v) { c.weights.lambda_perc = std::stod(v); });
  get("lambda_rec", [&](const std::string& v) { c.weights.lambda_rec = std::stod(v); });
  get("lambda_G", [&](const std::string& v) { c.weights.lambda_G = std::stod(v); });
  get("lambda_task", [&](const std::string& v) { c.weights.lambda_task = std::stod(v); });
}

vision::VisionConfig resolve_vision(int model_id, const std::vector<int>& widths, int blocks) {
  vision::VisionConfig vc = vision::zoo_config(model_id);
  if (!widths.empty()) vc.widths = widths;
  if (blocks > 0) vc.blocks_per_stage = blocks;
  return vc;
}

vision::VisionConfig resolve_vision(const TrainConfig& cfg) {
  return resolve_vision(cfg.model_id, cfg.vision_widths, cfg.vision_blocks);
}

double default_lambda_dist(vision::Family f) {
  switch (f) {
    case vision::Family::isotropic:
      return 0.1;
    case vision::Family::seg:
      return 10.0;
    default:
      return 0.01;  // hierarchical families
  }
}

RunSummary train_teacher(const TrainConfig& cfg) {
  ensure_run_dir(cfg.run_dir);
  write_config_file(cfg);
  vision::write_zoo_manifest(cfg.run_dir + "/model_zoo.txt");
  vision::VisionConfig vc = resolve_vision(cfg);
  const bool seg = vc.family == vision::Family::seg;
  POLC_CHECK_T((cfg.data == "synth:seg") == seg, SpecError,
               "teacher task/data mismatch (seg model wants synth:seg)");

  Rng init = Rng::stream(cfg.seed, kStreamVisionInit);
  Rng data_rng = Rng::stream(cfg.seed, kStreamData);
  vision::VisionModel model(vc, init);
  nn::ParamList params = model.all_params();
  nn::Adam opt(params);
  Corpus corpus = load_corpus(cfg, true);

  CsvLog losses, evals;
  losses.open(cfg.run_dir + "/losses.csv", "step,lambda_rate,L_rate,L_rec,L_G,L_D,L_task,L_dist,total", false);
  evals.open(cfg.run_dir + "/eval.csv", "step,metric,value", false);

  RunSummary sum;
  std::string last_ckpt;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    Batch b = draw_batch(corpus, cfg, data_rng, true, false);
    Var x = make_leaf(b.images);
    auto out = model.forward_full(x);
    Var loss = seg ? objectives::task_loss_seg(out.pred, b.masks) : objectives::task_loss_cls(out.pred, b.labels);
    if (!std::isfinite(loss->value[0]))
      throw DivergenceError("teacher loss non-finite at step " + std::to_string(step) +
                            (last_ckpt.empty() ? "" : "; last good checkpoint: " + last_ckpt));
    nn::zero_grads(params);
    backward(loss);
    opt.step(lr_at(step, cfg));
    sum.last_total = loss->value[0];
    losses.os << step << ",0,0,0,0,0," << loss->value[0] << ",0," << loss->value[0] << "\n";

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      double metric = 0;
      int batches = 0;
      for (std::size_t i = 0; i < corpus.eval.size(); i += 16) {
        std::vector<ImageBuffer> imgs;
        std::vector<int> labels, masks;
        for (std::size_t j = i; j < std::min(corpus.eval.size(), i + 16); ++j) {
          imgs.push_back(corpus.eval[j].image);
          if (seg)
            masks.insert(masks.end(), corpus.eval[j].mask.begin(), corpus.eval[j].mask.end());
          else
            labels.push_back(corpus.eval[j].label);
        }
        auto eo = model.forward_full(make_leaf(stack_images(imgs)));
        metric += seg ? seg_miou_from_logits(eo.pred, masks, vc.num_classes) : task_accuracy(eo.pred, labels);
        ++batches;
      }
      evals.os << (step + 1) << "," << (seg ? "miou" : "top1") << "," << metric / batches << "\n";
      evals.os.flush();
    }
    if (cfg.ckpt_every > 0 && (step + 1) % cfg.ckpt_every == 0 && step + 1 < cfg.steps) {
      Checkpoint ck;
      model.save_into(ck, "vision");
      ck.meta["stage"] = "teacher";
      last_ckpt = cfg.run_dir + "/ckpt_" + std::to_string(step + 1) + ".bin";
      ck.save(last_ckpt);
    }
  }
  Checkpoint ck;
  model.save_into(ck, "vision");
  ck.meta["stage"] = "teacher";
  sum.final_ckpt = cfg.run_dir + "/final.bin";
  ck.save(sum.final_ckpt);
  sum.steps_run = cfg.steps;
  return sum;
}

namespace {

void save_codec_state(const TrainConfig& cfg, const Codec& codec, const objectives::Discriminator& disc,
                      const nn::Adam& gen_opt, const nn::Adam& disc_opt, const Rng& data_rng,
                      const Rng& noise_rng, const Rng& lambda_rng, std::int64_t next_step,
                      const std::string& path) {
  Checkpoint ck;
  codec.save_into(ck);
  disc.save_into(ck);
  gen_opt.save_state(ck.tensors, "opt.gen");
  disc_opt.save_state(ck.tensors, "opt.disc");
  ck.tensors["rng.data"] = rng_to_tensor(data_rng);
  ck.tensors["rng.noise"] = rng_to_tensor(noise_rng);
  ck.tensors["rng.lambda"] = rng_to_tensor(lambda_rng);
  ck.meta["stage"] = "codec";
  ck.meta["mode"] = cfg.mode;
  ck.meta["next_step"] = std::to_string(next_step);
  for (auto& [k, v] : config_to_kv(cfg)) ck.meta["cfg." + k] = v;
  ck.save(path);
}

}  // namespace

RunSummary train_codec(const TrainConfig& cfg) {
  POLC_CHECK_T(cfg.mode == "polc" || cfg.mode == "mse", SpecError, "codec mode must be polc or mse");
  const bool polc_mode = cfg.mode == "polc";
  ensure_run_dir(cfg.run_dir);
  write_config_file(cfg);

  TrainConfig eff = cfg;
  if (!polc_mode) {
    eff.weights.lambda_perc = 0.0;  // the comparison baseline: pure MSE objective
    eff.weights.lambda_G = 0.0;
  }

  Rng codec_init = Rng::stream(cfg.seed, kStreamCodecInit);
  Rng disc_init = Rng::stream(cfg.seed, kStreamDiscInit);
  Rng data_rng = Rng::stream(cfg.seed, kStreamData);
  Rng noise_rng = Rng::stream(cfg.seed, kStreamNoise);
  Rng lambda_rng = lambda_stream(cfg.seed);

  Codec codec(cfg.codec, codec_init);
  objectives::Discriminator disc(cfg.codec.latent_channels, cfg.disc_width, disc_init);

  std::optional<vision::VisionModel> teacher;
  nn::ParamList teacher_params;
  if (polc_mode) {
    POLC_CHECK_T(!cfg.teacher_ckpt.empty(), SpecError, "polc mode needs a teacher checkpoint (perceptual backbone)");
    teacher = vision::VisionModel::load_from(Checkpoint::load(cfg.teacher_ckpt), "vision");
    teacher_params = teacher->all_params();
    nn::set_trainable(teacher_params, false);
  }

  nn::ParamList gen_params = codec.all_params();
  nn::ParamList disc_params = disc.params();
  nn::Adam gen_opt(gen_params);
  nn::Adam disc_opt(disc_params);

  std::int64_t step0 = 0;
  if (!cfg.resume_from.empty()) {
    Checkpoint ck = Checkpoint::load(cfg.resume_from);
    POLC_CHECK_T(ck.meta.count("stage") && ck.meta.at("stage") == "codec", IncompatError,
                 "resume checkpoint is not a codec-stage checkpoint");
    for (auto& [gname, ps] : codec.groups())
      for (auto& p : ps) p.v->value = ck.get("codec." + p.name);
    for (auto& p : disc_params) p.v->value = ck.get("disc." + p.name);
    gen_opt.load_state(ck.tensors, "opt.gen");
    disc_opt.load_state(ck.tensors, "opt.disc");
    data_rng = rng_from_tensor(ck.get("rng.data"));
    noise_rng = rng_from_tensor(ck.get("rng.noise"));
    lambda_rng = rng_from_tensor(ck.get("rng.lambda"));
    step0 = std::stoll(ck.meta.at("next_step"));
  }

  Corpus corpus = load_corpus(cfg, false);

  CsvLog losses, evals;
  losses.open(cfg.run_dir + "/losses.csv", "step,lambda_rate,L_rate,L_rec,L_G,L_D,L_task,L_dist,total",
              step0 > 0);
  evals.open(cfg.run_dir + "/eval.csv", "step,rate_index,psnr,bpp,perc", step0 > 0);

  RunSummary sum;
  if (teacher) sum.frozen_hashes_begin["teacher"] = nn::params_hash(teacher_params);
  const std::uint64_t disc_hash0 = nn::params_hash(disc_params);
  std::string last_ckpt;

  for (std::int64_t step = step0; step < cfg.steps; ++step) {
    const int idx = sample_rate_index(lambda_rng);
    const double lam = kRateLambdas[static_cast<std::size_t>(idx)];
    Batch b = draw_batch(corpus, cfg, data_rng, false, true);
    const int H = b.images.dim(2), W = b.images.dim(3);
    Var x = make_leaf(b.images);

    Var y = codec.analysis(x);
    Var yg = codec.apply_gain(y, idx);
    Var zt = o::add(yg, make_leaf(noise_like(yg->value.shape(), noise_rng)));
    Var rate = codec.rate_bpp(zt, idx, H, W);
    Var xh = codec.synthesis(codec.apply_inv_gain(zt, idx));

    double ld_val = 0;
    Var lg;
    if (polc_mode) {
      Var zf = detach(zt);
      Var xf = detach(xh);
      // the real branch conditions on the same noise-quantized latent as the
      // generator path
      Var ld = objectives::disc_loss(disc, zf, xf, zf, x);
      ld_val = ld->value[0];
      nn::zero_grads(disc_params);
      backward(ld);
      disc_opt.step(lr_at(step, cfg));
      nn::set_trainable(disc_params, false);
      lg = objectives::gen_loss(disc, zt, xh);
    }
    Var rec = objectives::rec_loss(x, xh, eff.weights, teacher ? &*teacher : nullptr);
    objectives::EgpTerms terms;
    Var total = objectives::egp_loss(rate, rec, polc_mode ? &lg : nullptr, lam, eff.weights, &terms);
    if (!std::isfinite(terms.total))
      throw DivergenceError("codec loss non-finite at step " + std::to_string(step) +
                            (last_ckpt.empty() ? "" : "; last good checkpoint: " + last_ckpt));
    nn::zero_grads(gen_params);
    backward(total);
    gen_opt.step(lr_at(step, cfg));
    if (polc_mode) nn::set_trainable(disc_params, true);

    sum.last_total = terms.total;
    losses.os << step << "," << lam << "," << terms.rate << "," << terms.rec << "," << terms.gen << ","
              << ld_val << ",0,0," << terms.total << "\n";

    if (cfg.hash_check_every > 0 && (step + 1) % cfg.hash_check_every == 0) {
      if (teacher && nn::params_hash(teacher_params) != sum.frozen_hashes_begin["teacher"])
        sum.frozen_ok = false;
      if (teacher && !nn::grads_all_zero(teacher_params)) sum.frozen_grads_zero = false;
      if (!polc_mode && nn::params_hash(disc_params) != disc_hash0) sum.frozen_ok = false;
    }

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      for (int ridx : {0, 3, 7}) {
        double psnr_sum = 0, bpp_sum = 0, perc_sum = 0;
        const std::size_t ne = std::min<std::size_t>(corpus.eval.size(), 16);
        for (std::size_t i = 0; i < ne; ++i) {
          const ImageBuffer& img = corpus.eval[i].image;
          LatentCode z = codec.quantize(codec.encode(img, rate_point(ridx)), QuantizeMode::round);
          ImageBuffer xhat = codec.decode(z, rate_point(ridx));
          bpp_sum += codec.estimate_rate(z, img.height(), img.width()).second;
          const double m = ops::t_mse(img.pix, xhat.pix);
          psnr_sum += m <= 1e-10 ? 99.0 : std::min(99.0, 10.0 * std::log10(1.0 / m));
          if (teacher) {
            Var pv = objectives::perc_distance(
                make_leaf(img.pix.reshaped({1, 3, img.height(), img.width()})),
                make_leaf(xhat.pix.reshaped({1, 3, img.height(), img.width()})), *teacher);
            perc_sum += pv->value[0];
          }
        }
        evals.os << (step + 1) << "," << ridx << "," << psnr_sum / ne << "," << bpp_sum / ne << ","
                 << perc_sum / ne << "\n";
      }
      evals.os.flush();
    }
    if (cfg.ckpt_every > 0 && (step + 1) % cfg.ckpt_every == 0 && step + 1 < cfg.steps) {
      last_ckpt = cfg.run_dir + "/ckpt_" + std::to_string(step + 1) + ".bin";
      save_codec_state(cfg, codec, disc, gen_opt, disc_opt, data_rng, noise_rng, lambda_rng, step + 1,
                       last_ckpt);
    }
  }
  sum.final_ckpt = cfg.run_dir + "/final.bin";
  save_codec_state(cfg, codec, disc, gen_opt, disc_opt, data_rng, noise_rng, lambda_rng, cfg.steps,
                   sum.final_ckpt);
  if (teacher) {
    sum.frozen_hashes_end["teacher"] = nn::params_hash(teacher_params);
    if (sum.frozen_hashes_end["teacher"] != sum.frozen_hashes_begin["teacher"]) sum.frozen_ok = false;
  }
  if (!polc_mode && nn::params_hash(disc_params) != disc_hash0) sum.frozen_ok = false;
  sum.steps_run = cfg.steps - step0;
  return sum;
}

RunSummary train_adapter(const TrainConfig& cfg) {
  ensure_run_dir(cfg.run_dir);
  write_config_file(cfg);
  POLC_CHECK_T(!cfg.codec_ckpt.empty(), SpecError, "adapter stage needs a codec checkpoint");
  POLC_CHECK_T(!cfg.teacher_ckpt.empty(), SpecError, "adapter stage needs a teacher checkpoint");

  Checkpoint codec_ck = Checkpoint::load(cfg.codec_ckpt);
  Codec codec = Codec::load_from(codec_ck);
  Checkpoint teacher_ck = Checkpoint::load(cfg.teacher_ckpt);
  vision::VisionModel teacher = vision::VisionModel::load_from(teacher_ck, "vision");
  vision::VisionModel student = vision::VisionModel::load_from(teacher_ck, "vision");
  const vision::VisionConfig& vc = student.config();
  const bool seg = vc.family == vision::Family::seg;
  POLC_CHECK_T((cfg.data == "synth:seg") == seg, SpecError, "adapter task/data mismatch");

  nn::ParamList codec_params = codec.all_params();
  nn::ParamList teacher_params = teacher.all_params();
  nn::ParamList student_all = student.all_params();
  nn::set_trainable(codec_params, false);
  nn::set_trainable(teacher_params, false);
  nn::set_trainable(student_all, false);

  Rng adapter_init = Rng::stream(cfg.seed, kStreamAdapterInit);
  Rng data_rng = Rng::stream(cfg.seed, kStreamData);
  Rng noise_rng = Rng::stream(cfg.seed, kStreamNoise);
  Rng lambda_rng = lambda_stream(cfg.seed);

  adapter::Adapter adp(
      adapter::infer_spec(codec.config(), vc, adapter::variant_from_name(cfg.adapter_variant)), adapter_init);

  nn::ParamList trainables = adp.params();
  nn::ParamList student_trunk = student.trunk_params();
  if (cfg.full_ft) {
    nn::set_trainable(student_trunk, true);
    for (auto& p : student_trunk) trainables.push_back(p);
  }
  nn::Adam opt(trainables);

  TrainConfig eff = cfg;
  eff.weights.lambda_dist = cfg.lambda_dist < 0 ? default_lambda_dist(vc.family) : cfg.lambda_dist;

  std::int64_t step0 = 0;
  if (!cfg.resume_from.empty()) {
    Checkpoint ck = Checkpoint::load(cfg.resume_from);
    POLC_CHECK_T(ck.meta.count("stage") && ck.meta.at("stage") == "adapter", IncompatError,
                 "resume checkpoint is not an adapter-stage checkpoint");
    for (auto& p : trainables) p.v->value = ck.get("train." + p.name);
    opt.load_state(ck.tensors, "opt.adapter");
    data_rng = rng_from_tensor(ck.get("rng.data"));
    noise_rng = rng_from_tensor(ck.get("rng.noise"));
    lambda_rng = rng_from_tensor(ck.get("rng.lambda"));
    step0 = std::stoll(ck.meta.at("next_step"));
  }

  Corpus corpus = load_corpus(cfg, true);

  CsvLog losses, evals;
  losses.open(cfg.run_dir + "/losses.csv", "step,lambda_rate,L_rate,L_rec,L_G,L_D,L_task,L_dist,total",
              step0 > 0);
  evals.open(cfg.run_dir + "/eval.csv", "step,rate_index,metric,value", step0 > 0);

  RunSummary sum;
  sum.frozen_hashes_begin["codec"] = nn::params_hash(codec_params);
  sum.frozen_hashes_begin["teacher"] = nn::params_hash(teacher_params);

  auto save_state = [&](std::int64_t next_step, const std::string& path) {
    Checkpoint ck;
    for (auto& p : trainables) ck.tensors["train." + p.name] = p.v->value;
    opt.save_state(ck.tensors, "opt.adapter");
    ck.tensors["rng.data"] = rng_to_tensor(data_rng);
    ck.tensors["rng.noise"] = rng_to_tensor(noise_rng);
    ck.tensors["rng.lambda"] = rng_to_tensor(lambda_rng);
    ck.meta["stage"] = "adapter";
    ck.meta["next_step"] = std::to_string(next_step);
    for (auto& [k, v] : config_to_kv(cfg)) ck.meta["cfg." + k] = v;
    ck.save(path);
  };

  std::string last_ckpt;
  for (std::int64_t step = step0; step < cfg.steps; ++step) {
    const int idx = sample_rate_index(lambda_rng);
    const double lam = kRateLambdas[static_cast<std::size_t>(idx)];
    Batch b = draw_batch(corpus, cfg, data_rng, true, false);
    const int H = b.images.dim(2), W = b.images.dim(3);
    Var x = make_leaf(b.images);

    auto teacher_out = teacher.forward_full(x);
    Var y = codec.analysis(x);
    Var zt = o::add(codec.apply_gain(y, idx), make_leaf(noise_like(y->value.shape(), noise_rng)));
    Var rate = codec.rate_bpp(zt, idx, H, W);
    Var f1 = adp.forward(codec.apply_inv_gain(zt, idx));
    auto out = student.forward_from_features(f1);

    Var task = seg ? objectives::task_loss_seg(out.pred, b.masks) : objectives::task_loss_cls(out.pred, b.labels);
    Var dist = objectives::dist_loss(out.taps, teacher_out.taps, eff.weights.stage_weights);
    objectives::AdaptTerms terms;
    Var total = objectives::adapt_loss(rate, task, dist, lam, eff.weights, &terms);
    if (!std::isfinite(terms.total))
      throw DivergenceError("adapter loss non-finite at step " + std::to_string(step) +
                            (last_ckpt.empty() ? "" : "; last good checkpoint: " + last_ckpt));
    nn::zero_grads(trainables);
    backward(total);
    opt.step(lr_at(step, cfg));

    sum.last_total = terms.total;
    losses.os << step << "," << lam << "," << terms.rate << ",0,0,0," << terms.task << "," << terms.dist
              << "," << terms.total << "\n";

    if (cfg.hash_check_every > 0 && (step + 1) % cfg.hash_check_every == 0) {
      if (nn::params_hash(codec_params) != sum.frozen_hashes_begin["codec"]) sum.frozen_ok = false;
      if (nn::params_hash(teacher_params) != sum.frozen_hashes_begin["teacher"]) sum.frozen_ok = false;
      if (!nn::grads_all_zero(codec_params) || !nn::grads_all_zero(teacher_params))
        sum.frozen_grads_zero = false;
    }

    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      double metric = 0;
      const std::size_t ne = std::min<std::size_t>(corpus.eval.size(), 32);
      std::size_t done = 0;
      for (std::size_t i = 0; i < ne; i += 8) {
        std::vector<int> labels, masks;
        std::vector<LatentCode> zs;
        for (std::size_t j = i; j < std::min(ne, i + 8); ++j) {
          const auto& s = corpus.eval[j];
          zs.push_back(codec.quantize(codec.encode(s.image, rate_point(cfg.eval_rate_index)), QuantizeMode::round));
          if (seg)
            masks.insert(masks.end(), s.mask.begin(), s.mask.end());
          else
            labels.push_back(s.label);
        }
        const int c = zs[0].channels(), lh = zs[0].h(), lw = zs[0].w();
        Tensor zb({static_cast<int>(zs.size()), c, lh, lw});
        for (std::size_t j = 0; j < zs.size(); ++j)
          for (std::int64_t k = 0; k < zs[j].values.size(); ++k)
            zb[static_cast<std::int64_t>(j) * c * lh * lw + k] = zs[j].values[k];
        Var fz = adp.forward(codec.apply_inv_gain(make_leaf(zb), cfg.eval_rate_index));
        auto eo = student.forward_from_features(fz);
        if (seg)
          metric += seg_miou_from_logits(eo.pred, masks, vc.num_classes) * static_cast<double>(zs.size());
        else
          metric += task_accuracy(eo.pred, labels) * static_cast<double>(zs.size());
        done += zs.size();
      }
      evals.os << (step + 1) << "," << cfg.eval_rate_index << "," << (seg ? "miou" : "top1") << ","
               << metric / static_cast<double>(done) << "\n";
      evals.os.flush();
    }
    if (cfg.ckpt_every > 0 && (step + 1) % cfg.ckpt_every == 0 && step + 1 < cfg.steps) {
      last_ckpt = cfg.run_dir + "/ckpt_" + std::to_string(step + 1) + ".bin";
      save_state(step + 1, last_ckpt);
    }
  }

  sum.frozen_hashes_end["codec"] = nn::params_hash(codec_params);
  sum.frozen_hashes_end["teacher"] = nn::params_hash(teacher_params);
  if (sum.frozen_hashes_end["codec"] != sum.frozen_hashes_begin["codec"]) sum.frozen_ok = false;
  if (sum.frozen_hashes_end["teacher"] != sum.frozen_hashes_begin["teacher"]) sum.frozen_ok = false;

  // inference checkpoint: codec + adapter + student vision; the teacher taps
  // are a training-time scaffold and are not saved
  Checkpoint ck;
  codec.save_into(ck);
  adp.save_into(ck);
  student.save_into(ck, "vision");
  ck.meta["stage"] = "adapter";
  ck.meta["model_id"] = std::to_string(vc.model_id);
  ck.meta["full_ft"] = cfg.full_ft ? "1" : "0";
  sum.final_ckpt = cfg.run_dir + "/final.bin";
  ck.save(sum.final_ckpt);
  sum.steps_run = cfg.steps - step0;
  return sum;
}

}  // namespace polc::train
