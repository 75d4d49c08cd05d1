#include "polc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "polc/config.hpp"
#include "polc/evaluation.hpp"
#include "polc/image_io.hpp"
#include "polc/plots.hpp"
#include "polc/training.hpp"

namespace polc::cli {

namespace fs = std::filesystem;

namespace {

void add_train_options(CLI::App* app, train::TrainConfig& cfg, std::string& widths_csv) {
  // config files are pre-applied in run(); the option is registered here so
  // it parses and shows up in --help
  static std::string sink;
  app->add_option("--config", sink, "flat key=value config file (flags take precedence)");
  app->add_option("--steps", cfg.steps);
  app->add_option("--batch_size", cfg.batch_size);
  app->add_option("--lr_init", cfg.lr_init);
  app->add_option("--lr_final", cfg.lr_final);
  app->add_option("--decay_start_frac", cfg.decay_start_frac);
  app->add_option("--lr_shape", cfg.lr_shape)->check(CLI::IsMember({"linear", "cosine"}));
  app->add_option("--seed", cfg.seed);
  app->add_option("--eval_every", cfg.eval_every);
  app->add_option("--ckpt_every", cfg.ckpt_every);
  app->add_option("--hash_check_every", cfg.hash_check_every);
  app->add_option("--run_dir", cfg.run_dir);
  app->add_option("--resume_from", cfg.resume_from);
  app->add_option("--data", cfg.data);
  app->add_option("--corpus_n", cfg.corpus_n);
  app->add_option("--eval_n", cfg.eval_n);
  app->add_option("--patch", cfg.patch);
  app->add_option("--augment", cfg.augment);
  app->add_option("--latent_channels", cfg.codec.latent_channels);
  app->add_option("--base_width", cfg.codec.base_width);
  app->add_option("--disc_width", cfg.disc_width);
  app->add_option("--teacher_ckpt", cfg.teacher_ckpt);
  app->add_option("--model_id", cfg.model_id);
  app->add_option("--vision_widths", widths_csv);
  app->add_option("--vision_blocks", cfg.vision_blocks);
  app->add_option("--codec_ckpt", cfg.codec_ckpt);
  app->add_option("--adapter_variant", cfg.adapter_variant)
      ->check(CLI::IsMember({"shuffle", "tconv", "no_resblock"}));
  app->add_option("--full_ft", cfg.full_ft);
  app->add_option("--lambda_dist", cfg.lambda_dist);
  app->add_option("--eval_rate_index", cfg.eval_rate_index)->check(CLI::Range(0, 7));
  app->add_option("--lambda_d", cfg.weights.lambda_d);
  app->add_option("--lambda_perc", cfg.weights.lambda_perc);
  app->add_option("--lambda_rec", cfg.weights.lambda_rec);
  app->add_option("--lambda_G", cfg.weights.lambda_G);
  app->add_option("--lambda_task", cfg.weights.lambda_task);
}

void apply_widths(train::TrainConfig& cfg, const std::string& widths_csv) {
  if (widths_csv.empty()) return;  // keep config-file / default widths
  cfg.vision_widths.clear();
  std::stringstream ss(widths_csv);
  for (std::string tok; std::getline(ss, tok, ',');) cfg.vision_widths.push_back(std::stoi(tok));
}

Codec load_codec_ckpt(const std::string& path) { return Codec::load_from(Checkpoint::load(path)); }

struct TaskBundle {
  Codec codec;
  adapter::Adapter adp;
  vision::VisionModel student;
  int model_id;
};

TaskBundle load_task_ckpt(const std::string& path) {
  Checkpoint ck = Checkpoint::load(path);
  POLC_CHECK_T(ck.meta.count("stage") && ck.meta.at("stage") == "adapter", IncompatError,
               "not a task (adapter-stage) checkpoint: " + path);
  TaskBundle tb{Codec::load_from(ck), adapter::Adapter::load_from(ck),
                vision::VisionModel::load_from(ck, "vision"), std::stoi(ck.meta.at("model_id"))};
  return tb;
}

std::vector<data::Sample> load_eval_data(const std::string& data, int n, std::uint64_t seed) {
  if (data == "synth:cls") return data::synth_shapes(n, "cls", seed);
  if (data == "synth:seg") return data::synth_shapes(n, "seg", seed);
  // folder: center 64x64-ish crops are up to the caller; use full images
  std::vector<data::Sample> out;
  for (const auto& f : data::list_image_files(data)) {
    data::Sample s;
    s.image = read_image(f);
    out.push_back(std::move(s));
    if (static_cast<int>(out.size()) >= n) break;
  }
  POLC_CHECK_T(!out.empty(), IoError, "no eval images found in " + data);
  return out;
}

int cmd_make_data(const std::string& task, int n, std::uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  if (task == "textured") {
    auto imgs = data::synth_textured(n, 64, seed);
    for (std::size_t i = 0; i < imgs.size(); ++i)
      write_image(out_dir + "/tex_" + std::to_string(i) + ".png", imgs[i]);
    std::printf("wrote %zu textured images to %s\n", imgs.size(), out_dir.c_str());
    return 0;
  }
  auto samples = data::synth_shapes(n, task, seed);
  std::ofstream labels(out_dir + "/labels.csv");
  labels << "file,label\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string name = task + "_" + std::to_string(i);
    write_image(out_dir + "/" + name + ".png", samples[i].image);
    if (task == "cls") {
      labels << name << ".png," << samples[i].label << "\n";
    } else {
      Tensor m({samples[i].image.height(), samples[i].image.width()});
      for (std::int64_t j = 0; j < m.size(); ++j) m[j] = samples[i].mask[static_cast<std::size_t>(j)] / 255.0;
      write_gray(out_dir + "/" + name + "_mask.png", m);
    }
  }
  std::printf("wrote %zu %s samples to %s\n", samples.size(), task.c_str(), out_dir.c_str());
  return 0;
}

int cmd_encode(const std::string& input, const std::string& ckpt, int rate, int model_id,
               const std::string& out) {
  Codec codec = load_codec_ckpt(ckpt);
  ImageBuffer img = read_image(input);
  auto [padded, orig] = pad_to_multiple(img, kLatentDivisor);
  LatentCode z = codec.quantize(codec.encode(padded, rate_point(rate)), QuantizeMode::round);
  auto [est_bits, est_bpp] = codec.estimate_rate(z, orig.first, orig.second);
  Bitstream bs = write_stream(z, orig.first, orig.second, model_id, codec);
  bs.save(out);
  const double actual_bits = static_cast<double>(fs::file_size(out)) * 8.0;
  const double px = static_cast<double>(orig.first) * orig.second;
  std::printf("wrote %s: %.0f bits (%.4f bpp); estimate %.0f bits (%.4f bpp); actual-estimate %+.0f bits\n",
              out.c_str(), actual_bits, actual_bits / px, est_bits, est_bpp, actual_bits - est_bits);
  return 0;
}

int cmd_decode(const std::string& input, const std::string& ckpt, const std::string& out) {
  Codec codec = load_codec_ckpt(ckpt);
  Bitstream bs = Bitstream::load(input);
  LatentCode z = read_stream(bs, codec);
  ImageBuffer xh = codec.decode(z, rate_point(bs.rate_index));
  xh = crop(xh, bs.height, bs.width);
  write_image(out, xh);
  std::printf("decoded %s -> %s (%dx%d, rate %d)\n", input.c_str(), out.c_str(), bs.width, bs.height,
              bs.rate_index);
  return 0;
}

int cmd_infer(const std::string& input, const std::string& ckpt, const std::string& also_decode,
              const std::string& dump_features, const std::string& mask_out) {
  TaskBundle tb = load_task_ckpt(ckpt);
  Bitstream bs = Bitstream::load(input);
  POLC_CHECK_T(bs.model_id == tb.model_id, IncompatError,
               "stream model_id " + std::to_string(bs.model_id) + " does not match checkpoint model_id " +
                   std::to_string(tb.model_id));
  LatentCode z = read_stream(bs, tb.codec);
  // compressed-domain path: the latent is mapped straight into the trunk;
  // the synthesis transform is never invoked unless --also-decode asks for it
  Var f = tb.adp.forward(
      tb.codec.apply_inv_gain(make_leaf(z.values.reshaped({1, z.channels(), z.h(), z.w()})), z.rate_index));
  auto out = tb.student.forward_from_features(f);

  if (tb.student.config().family == vision::Family::seg) {
    const int k = out.pred->value.dim(1);
    const int h = out.pred->value.dim(2), w = out.pred->value.dim(3);
    Tensor mask({h, w});
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (std::int64_t px = 0; px < plane; ++px) {
      int arg = 0;
      double best = out.pred->value[px];
      for (int j = 1; j < k; ++j)
        if (out.pred->value[static_cast<std::int64_t>(j) * plane + px] > best) {
          best = out.pred->value[static_cast<std::int64_t>(j) * plane + px];
          arg = j;
        }
      mask[px] = arg / 255.0;
    }
    const std::string mpath = mask_out.empty() ? input + ".mask.png" : mask_out;
    write_gray(mpath, mask);
    std::printf("segmentation mask -> %s\n", mpath.c_str());
  } else {
    const int k = out.pred->value.dim(1);
    std::vector<std::pair<double, int>> scored;
    double m = out.pred->value[0];
    for (int j = 1; j < k; ++j) m = std::max(m, out.pred->value[j]);
    double zsum = 0;
    for (int j = 0; j < k; ++j) zsum += std::exp(out.pred->value[j] - m);
    for (int j = 0; j < k; ++j) scored.push_back({std::exp(out.pred->value[j] - m) / zsum, j});
    std::sort(scored.rbegin(), scored.rend());
    std::printf("top-5 classes:\n");
    for (int j = 0; j < std::min(5, k); ++j)
      std::printf("  class %d  p=%.4f\n", scored[static_cast<std::size_t>(j)].second,
                  scored[static_cast<std::size_t>(j)].first);
  }

  if (!dump_features.empty()) {
    std::ofstream os(dump_features);
    POLC_CHECK_T(os.good(), IoError, "cannot write " + dump_features);
    os << "stage,channel,mean\n";
    for (std::size_t s = 0; s < out.taps.size(); ++s) {
      const auto& t = out.taps[s]->value;
      const std::int64_t plane = static_cast<std::int64_t>(t.dim(2)) * t.dim(3);
      for (int ch = 0; ch < t.dim(1); ++ch) {
        double acc = 0;
        for (std::int64_t i = 0; i < plane; ++i) acc += t[(static_cast<std::int64_t>(ch)) * plane + i];
        os << (s + 1) << "," << ch << "," << acc / static_cast<double>(plane) << "\n";
      }
    }
    std::printf("stage features -> %s\n", dump_features.c_str());
  }
  if (!also_decode.empty()) {
    ImageBuffer xh = tb.codec.decode(z, rate_point(z.rate_index));
    xh = crop(xh, bs.height, bs.width);
    write_image(also_decode, xh);
    std::printf("reconstruction -> %s\n", also_decode.c_str());
  }
  return 0;
}

int cmd_export_latents(const std::string& ckpt, const std::string& dataset, int n, int rate,
                       std::uint64_t seed, const std::string& out) {
  Codec codec = load_codec_ckpt(ckpt);
  POLC_CHECK_T(dataset == "synth:cls", SpecError, "export-latents supports synth:cls");
  auto samples = data::synth_shapes(n, "cls", seed);
  std::ofstream os(out);
  POLC_CHECK_T(os.good(), IoError, "cannot write " + out);
  os << "label";
  for (int c = 0; c < codec.config().latent_channels; ++c) os << ",z" << c;
  os << "\n";
  os.precision(10);
  for (const auto& s : samples) {
    LatentCode z = codec.quantize(codec.encode(s.image, rate_point(rate)), QuantizeMode::round);
    Tensor pooled = eval::pooled_latent(z);
    os << s.label;
    for (std::int64_t c = 0; c < pooled.size(); ++c) os << "," << pooled[c];
    os << "\n";
  }
  std::printf("wrote %d pooled latents to %s\n", n, out.c_str());
  return 0;
}

int cmd_sweep(const std::string& codec_ckpt, const std::string& task_ckpt, const std::string& teacher_ckpt,
              const std::string& dataset, int n, std::uint64_t seed, const std::string& out_dir,
              const std::string& mode_tag) {
  fs::create_directories(out_dir);
  auto eval_set = load_eval_data(dataset, n, seed);

  std::optional<TaskBundle> tb;
  std::optional<Codec> codec;
  if (!task_ckpt.empty())
    tb = load_task_ckpt(task_ckpt);
  else
    codec = load_codec_ckpt(codec_ckpt);
  std::optional<vision::VisionModel> perc;
  if (!teacher_ckpt.empty()) perc = vision::VisionModel::load_from(Checkpoint::load(teacher_ckpt), "vision");

  eval::SweepInputs in;
  in.codec = tb ? &tb->codec : &*codec;
  if (tb) {
    in.adp = &tb->adp;
    in.student = &tb->student;
  }
  if (perc) in.perc_net = &*perc;
  in.mode_tag = mode_tag;
  in.tmp_dir = out_dir;
  auto rows = eval::sweep(in, eval_set);
  eval::write_sweep_csv(rows, out_dir + "/sweep.csv");

  plots::Series psnr_s{mode_tag, {}, {}}, task_s{mode_tag, {}, {}};
  for (const auto& r : rows) {
    psnr_s.x.push_back(r.bpp);
    psnr_s.y.push_back(r.psnr);
    if (r.task_metric >= 0) {
      task_s.x.push_back(r.bpp);
      task_s.y.push_back(r.task_metric);
    }
  }
  plots::write_line_svg(out_dir + "/rd_curve.svg", "reconstruction quality vs rate", "bpp", "PSNR (dB)",
                        {psnr_s});
  if (!task_s.x.empty())
    plots::write_line_svg(out_dir + "/task_curve.svg", "task metric vs rate", "bpp", "metric", {task_s});
  std::printf("sweep -> %s/sweep.csv (%zu rows)\n", out_dir.c_str(), rows.size());
  return 0;
}

int cmd_ablate(train::TrainConfig base, const std::vector<std::string>& variants, const std::string& report) {
  POLC_CHECK_T(!base.run_dir.empty(), SpecError, "ablate needs --run_dir");
  struct Row {
    std::string variant;
    std::int64_t params;
    double metric;
  };
  std::vector<Row> rows;
  for (const auto& v : variants) {
    train::TrainConfig cfg = base;
    cfg.stage = "adapter";
    cfg.adapter_variant = v;
    cfg.run_dir = base.run_dir + "/" + v;
    auto sum = train::train_adapter(cfg);
    TaskBundle tb = load_task_ckpt(sum.final_ckpt);
    auto eval_set = load_eval_data(cfg.data, cfg.eval_n, train::splitmix_seed(cfg.seed, 9));
    eval::SweepInputs in;
    in.codec = &tb.codec;
    in.adp = &tb.adp;
    in.student = &tb.student;
    in.mode_tag = v;
    in.tmp_dir = cfg.run_dir;
    auto srows = eval::sweep(in, eval_set);
    // report the configured eval rate point
    double metric = 0;
    for (const auto& r : srows)
      if (r.rate_index == cfg.eval_rate_index) metric = r.task_metric;
    rows.push_back({v, eval::count_params(tb.adp.params()), metric});
    // append full sweep rows to the shared report
    const bool existed = fs::exists(report);
    std::ofstream os(report, std::ios::app);
    if (!existed) os << "rate_index,model,mode,bpp,psnr,perc,task_metric,trainable_params,flops\n";
    for (const auto& r : srows)
      os << r.rate_index << "," << r.model << "," << r.mode << "," << r.bpp << "," << r.psnr << "," << r.perc
         << "," << r.task_metric << "," << r.trainable_params << "," << r.flops << "\n";
  }
  std::printf("variant        params   delta_vs_shuffle   metric@%d\n", base.eval_rate_index);
  std::int64_t base_params = rows.front().params;
  for (const auto& r : rows)
    if (r.variant == "shuffle") base_params = r.params;
  for (const auto& r : rows)
    std::printf("%-12s %8lld   %+8lld           %.4f\n", r.variant.c_str(),
                static_cast<long long>(r.params), static_cast<long long>(r.params - base_params), r.metric);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"perception-oriented latent coding toolkit"};
  app.require_subcommand(1);

  // make-data
  auto* mk = app.add_subcommand("make-data", "materialize synthetic corpora as image files");
  std::string mk_task = "cls", mk_out = "data_out";
  int mk_n = 100;
  std::uint64_t mk_seed = 0;
  mk->add_option("--task", mk_task)->check(CLI::IsMember({"cls", "seg", "textured"}));
  mk->add_option("--n", mk_n);
  mk->add_option("--seed", mk_seed);
  mk->add_option("--out", mk_out)->required();

  // training stages
  train::TrainConfig tc_teacher, tc_codec, tc_adapter;
  tc_teacher.stage = "teacher";
  tc_teacher.steps = 8000;
  tc_codec.stage = "codec";
  tc_adapter.stage = "adapter";
  tc_adapter.steps = 25000;
  std::string w_teacher, w_codec, w_adapter;
  auto* tt = app.add_subcommand("train-teacher", "train a vision model on uncompressed images");
  add_train_options(tt, tc_teacher, w_teacher);
  auto* tcod = app.add_subcommand("train-codec", "stage-1 coder training (polc or mse objective)");
  add_train_options(tcod, tc_codec, w_codec);
  tcod->add_option("--mode", tc_codec.mode)->check(CLI::IsMember({"polc", "mse"}));
  auto* tad = app.add_subcommand("train-adapter", "stage-2 fine-tuning on frozen coder latents");
  add_train_options(tad, tc_adapter, w_adapter);

  // encode / decode / infer
  auto* enc = app.add_subcommand("encode", "compress an image to a .polc stream");
  std::string enc_in, enc_ckpt, enc_out;
  int enc_rate = 3, enc_model = 0;
  enc->add_option("--input", enc_in)->required();
  enc->add_option("--ckpt", enc_ckpt)->required();
  enc->add_option("--rate", enc_rate)->check(CLI::Range(0, 7));
  enc->add_option("--model-id", enc_model);
  enc->add_option("--out", enc_out)->required();

  auto* dec = app.add_subcommand("decode", "reconstruct an image from a .polc stream");
  std::string dec_in, dec_ckpt, dec_out;
  dec->add_option("--input", dec_in)->required();
  dec->add_option("--ckpt", dec_ckpt)->required();
  dec->add_option("--out", dec_out)->required();

  auto* inf = app.add_subcommand("infer", "compressed-domain inference from a .polc stream");
  std::string inf_in, inf_ckpt, inf_dec, inf_feat, inf_mask;
  inf->add_option("--input", inf_in)->required();
  inf->add_option("--ckpt", inf_ckpt)->required();
  inf->add_option("--also-decode", inf_dec);
  inf->add_option("--dump-features", inf_feat);
  inf->add_option("--mask-out", inf_mask);

  auto* swp = app.add_subcommand("sweep", "rate sweep report over the 8 operating points");
  std::string sw_codec, sw_task, sw_teacher, sw_data = "synth:cls", sw_out = "sweep_out", sw_tag = "polc";
  int sw_n = 32;
  std::uint64_t sw_seed = 7;
  swp->add_option("--codec", sw_codec);
  swp->add_option("--task-ckpt", sw_task);
  swp->add_option("--teacher", sw_teacher);
  swp->add_option("--data", sw_data);
  swp->add_option("--n", sw_n);
  swp->add_option("--seed", sw_seed);
  swp->add_option("--out", sw_out);
  swp->add_option("--mode-tag", sw_tag);

  auto* abl = app.add_subcommand("ablate", "train/evaluate adapter variants under one config");
  train::TrainConfig tc_abl;
  tc_abl.stage = "adapter";
  tc_abl.steps = 2000;
  std::string w_abl, abl_variants = "shuffle,tconv,no_resblock", abl_report = "ablate_report.csv";
  add_train_options(abl, tc_abl, w_abl);
  abl->add_option("--variants", abl_variants);
  abl->add_option("--report", abl_report);

  auto* exl = app.add_subcommand("export-latents", "dump pooled quantized latents with labels");
  std::string ex_ckpt, ex_data = "synth:cls", ex_out = "latents.csv";
  int ex_n = 200, ex_rate = 3;
  std::uint64_t ex_seed = 11;
  exl->add_option("--ckpt", ex_ckpt)->required();
  exl->add_option("--data", ex_data);
  exl->add_option("--n", ex_n);
  exl->add_option("--rate", ex_rate)->check(CLI::Range(0, 7));
  exl->add_option("--seed", ex_seed);
  exl->add_option("--out", ex_out);

  // precedence: flags > config file > defaults. The file is applied before
  // parsing so explicit flags overwrite it.
  try {
    std::string cfg_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) cfg_path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) cfg_path = args[i].substr(9);
    }
    if (!cfg_path.empty()) {
      auto kv = parse_kv_file(cfg_path);
      for (auto* c : {&tc_teacher, &tc_codec, &tc_adapter, &tc_abl}) train::config_apply_kv(*c, kv);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  }

  try {
    if (*mk) return cmd_make_data(mk_task, mk_n, mk_seed, mk_out);
    if (*tt) {
      apply_widths(tc_teacher, w_teacher);
      auto sum = train::train_teacher(tc_teacher);
      std::printf("teacher done: %s (last loss %.4f)\n", sum.final_ckpt.c_str(), sum.last_total);
      return 0;
    }
    if (*tcod) {
      apply_widths(tc_codec, w_codec);
      auto sum = train::train_codec(tc_codec);
      std::printf("codec done: %s (last total %.4f, frozen_ok=%d)\n", sum.final_ckpt.c_str(), sum.last_total,
                  sum.frozen_ok ? 1 : 0);
      return sum.frozen_ok ? 0 : 1;
    }
    if (*tad) {
      apply_widths(tc_adapter, w_adapter);
      auto sum = train::train_adapter(tc_adapter);
      std::printf("adapter done: %s (last total %.4f, frozen_ok=%d, frozen_grads_zero=%d)\n",
                  sum.final_ckpt.c_str(), sum.last_total, sum.frozen_ok ? 1 : 0,
                  sum.frozen_grads_zero ? 1 : 0);
      return (sum.frozen_ok && sum.frozen_grads_zero) ? 0 : 1;
    }
    if (*enc) return cmd_encode(enc_in, enc_ckpt, enc_rate, enc_model, enc_out);
    if (*dec) return cmd_decode(dec_in, dec_ckpt, dec_out);
    if (*inf) return cmd_infer(inf_in, inf_ckpt, inf_dec, inf_feat, inf_mask);
    if (*swp) {
      POLC_CHECK_T(!sw_codec.empty() || !sw_task.empty(), SpecError, "sweep needs --codec or --task-ckpt");
      return cmd_sweep(sw_codec, sw_task, sw_teacher, sw_data, sw_n, sw_seed, sw_out, sw_tag);
    }
    if (*abl) {
      apply_widths(tc_abl, w_abl);
      std::vector<std::string> variants;
      std::stringstream ss(abl_variants);
      for (std::string tok; std::getline(ss, tok, ',');) variants.push_back(tok);
      for (const auto& v : variants) (void)adapter::variant_from_name(v);  // usage validation
      return cmd_ablate(tc_abl, variants, abl_report);
    }
    if (*exl) return cmd_export_latents(ex_ckpt, ex_data, ex_n, ex_rate, ex_seed, ex_out);
  } catch (const IncompatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const SpecError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace polc::cli
