#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "polc/training.hpp"

using namespace polc;
namespace tr = polc::train;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  std::string path;
  explicit TmpDir(const std::string& name) : path("/tmp/polc_tt_" + name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

tr::TrainConfig tiny_teacher(const std::string& dir) {
  tr::TrainConfig c;
  c.stage = "teacher";
  c.steps = 8;
  c.batch_size = 4;
  c.corpus_n = 40;
  c.eval_n = 16;
  c.eval_every = 8;
  c.ckpt_every = 0;
  c.vision_widths = {6, 10, 14};
  c.vision_blocks = 1;
  c.seed = 3;
  c.run_dir = dir;
  return c;
}

tr::TrainConfig tiny_codec(const std::string& dir, const std::string& mode, const std::string& teacher) {
  tr::TrainConfig c;
  c.stage = "codec";
  c.mode = mode;
  c.steps = 6;
  c.batch_size = 2;
  c.corpus_n = 30;
  c.eval_n = 4;
  c.eval_every = 0;
  c.ckpt_every = 0;
  c.patch = 32;
  c.codec = {8, 6, 8};
  c.disc_width = 8;
  c.teacher_ckpt = teacher;
  c.seed = 3;
  c.run_dir = dir;
  return c;
}

std::vector<std::string> csv_column(const std::string& path, int col) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);  // header
  std::vector<std::string> out;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string tok;
    for (int i = 0; i <= col; ++i) std::getline(ss, tok, ',');
    out.push_back(tok);
  }
  return out;
}

}  // namespace

TEST_CASE("learning-rate schedule hits the documented anchor points") {
  tr::TrainConfig c;
  c.steps = 1000;
  CHECK(tr::lr_at(0, c) == doctest::Approx(1e-4));
  CHECK(tr::lr_at(750, c) == doctest::Approx(1e-4));
  CHECK(tr::lr_at(900, c) == doctest::Approx(1e-4 + (1e-5 - 1e-4) * (0.9 - 0.75) / 0.25).epsilon(1e-9));
  CHECK(tr::lr_at(900, c) == doctest::Approx(4.6e-5).epsilon(1e-9));
  CHECK(tr::lr_at(1000, c) == doctest::Approx(1e-5));
  CHECK(tr::lr_at(5000, c) == doctest::Approx(1e-5));  // clamp past the end
  c.lr_shape = "cosine";
  CHECK(tr::lr_at(0, c) == doctest::Approx(1e-4));
  CHECK(tr::lr_at(1000, c) == doctest::Approx(1e-5));
  CHECK(tr::lr_at(875, c) == doctest::Approx(1e-5 + (1e-4 - 1e-5) * 0.5).epsilon(1e-9));
}

TEST_CASE("rate-point sampling is uniform (chi-squared over 8000 draws)") {
  Rng lam = tr::lambda_stream(1);
  std::array<int, 8> counts{};
  const int n = 8000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(tr::sample_rate_index(lam))];
  const double expect = n / 8.0;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  // 7 degrees of freedom, p > 0.01 -> statistic below 18.475
  CHECK(chi2 < 18.475);
}

TEST_CASE("config key=value map round-trips every field") {
  tr::TrainConfig c;
  c.stage = "adapter";
  c.mode = "mse";
  c.steps = 123;
  c.vision_widths = {4, 8};
  c.codec = {24, 10, 8};
  c.weights.lambda_G = 0.5;
  c.full_ft = true;
  c.lambda_dist = 3.5;
  tr::TrainConfig back = tr::config_from_kv(tr::config_to_kv(c));
  CHECK(back.stage == "adapter");
  CHECK(back.mode == "mse");
  CHECK(back.steps == 123);
  CHECK(back.vision_widths == std::vector<int>{4, 8});
  CHECK(back.codec.latent_channels == 24);
  CHECK(back.codec.base_width == 10);
  CHECK(back.weights.lambda_G == 0.5);
  CHECK(back.full_ft);
  CHECK(back.lambda_dist == 3.5);
}

TEST_CASE("teacher training learns and writes a self-describing run dir") {
  TmpDir dir("teacher");
  tr::TrainConfig c = tiny_teacher(dir.path);
  c.steps = 60;
  auto sum = tr::train_teacher(c);
  CHECK(fs::exists(dir.path + "/config.txt"));
  CHECK(fs::exists(dir.path + "/losses.csv"));
  CHECK(fs::exists(dir.path + "/eval.csv"));
  CHECK(fs::exists(dir.path + "/model_zoo.txt"));
  CHECK(fs::exists(sum.final_ckpt));
  // loss came down from ln(10) chance level
  auto totals = csv_column(dir.path + "/losses.csv", 8);
  CHECK(std::stod(totals.front()) > std::stod(totals.back()));
}

TEST_CASE("mode symmetry: polc and mse share data order and lambda sampling") {
  TmpDir tdir("sym_teacher"), pdir("sym_polc"), mdir("sym_mse");
  auto teacher = tr::train_teacher(tiny_teacher(tdir.path));
  auto psum = tr::train_codec(tiny_codec(pdir.path, "polc", teacher.final_ckpt));
  auto msum = tr::train_codec(tiny_codec(mdir.path, "mse", ""));
  CHECK(psum.frozen_ok);
  CHECK(msum.frozen_ok);  // mse mode never touches the discriminator
  auto pl = csv_column(pdir.path + "/losses.csv", 1);
  auto ml = csv_column(mdir.path + "/losses.csv", 1);
  REQUIRE(pl.size() == ml.size());
  for (std::size_t i = 0; i < pl.size(); ++i) CHECK(pl[i] == ml[i]);
  // identical rate estimates on step 0 confirm identical init + data + noise
  auto pr = csv_column(pdir.path + "/losses.csv", 2);
  auto mr = csv_column(mdir.path + "/losses.csv", 2);
  CHECK(pr.front() == mr.front());
  // but the objectives differ: polc logs nonzero G and D terms
  auto pg = csv_column(pdir.path + "/losses.csv", 4);
  CHECK(std::stod(pg.front()) != 0.0);
  auto mg = csv_column(mdir.path + "/losses.csv", 4);
  CHECK(std::stod(mg.front()) == 0.0);
}

TEST_CASE("polc mode requires a teacher checkpoint") {
  TmpDir dir("noteacher");
  CHECK_THROWS_AS(tr::train_codec(tiny_codec(dir.path, "polc", "")), SpecError);
}

TEST_CASE("adapter stage freezes codec and teacher, and drops the teacher from the final checkpoint") {
  TmpDir tdir("ad_teacher"), cdir("ad_codec"), adir("ad_adapter");
  auto teacher = tr::train_teacher(tiny_teacher(tdir.path));
  auto codec = tr::train_codec(tiny_codec(cdir.path, "mse", ""));
  tr::TrainConfig c;
  c.stage = "adapter";
  c.steps = 30;
  c.batch_size = 2;
  c.corpus_n = 30;
  c.eval_n = 8;
  c.eval_every = 30;
  c.ckpt_every = 0;
  c.hash_check_every = 5;
  c.codec_ckpt = codec.final_ckpt;
  c.teacher_ckpt = teacher.final_ckpt;
  c.vision_widths = {6, 10, 14};
  c.vision_blocks = 1;
  c.seed = 9;
  c.run_dir = adir.path;
  auto sum = tr::train_adapter(c);
  CHECK(sum.frozen_ok);
  CHECK(sum.frozen_grads_zero);
  CHECK(sum.frozen_hashes_begin.at("codec") == sum.frozen_hashes_end.at("codec"));
  CHECK(sum.frozen_hashes_begin.at("teacher") == sum.frozen_hashes_end.at("teacher"));
  Checkpoint final = Checkpoint::load(sum.final_ckpt);
  bool has_teacher = false, has_opt = false;
  for (const auto& [name, t] : final.tensors) {
    has_teacher = has_teacher || name.rfind("teacher", 0) == 0;
    has_opt = has_opt || name.rfind("opt.", 0) == 0;
  }
  CHECK(!has_teacher);
  CHECK(!has_opt);  // inference checkpoint carries no training scaffolding
  CHECK(final.tensors.count("adapter.adapter.proj.w") == 1);
  // missing prerequisites error out
  tr::TrainConfig bad = c;
  bad.codec_ckpt = "";
  CHECK_THROWS_AS(tr::train_adapter(bad), SpecError);
  tr::TrainConfig bad2 = c;
  bad2.codec_ckpt = "/nonexistent/ckpt.bin";
  CHECK_THROWS_AS(tr::train_adapter(bad2), IoError);
}

TEST_CASE("adapter-only mode trains exactly the adapter parameter count") {
  TmpDir tdir("cnt_teacher"), cdir("cnt_codec"), adir("cnt_adapter");
  auto teacher = tr::train_teacher(tiny_teacher(tdir.path));
  auto codec = tr::train_codec(tiny_codec(cdir.path, "mse", ""));
  tr::TrainConfig c;
  c.stage = "adapter";
  c.steps = 2;
  c.batch_size = 2;
  c.corpus_n = 20;
  c.eval_n = 4;
  c.eval_every = 0;
  c.ckpt_every = 1;
  c.codec_ckpt = codec.final_ckpt;
  c.teacher_ckpt = teacher.final_ckpt;
  c.vision_widths = {6, 10, 14};
  c.vision_blocks = 1;
  c.seed = 10;
  c.run_dir = adir.path;
  (void)tr::train_adapter(c);
  // resume checkpoints carry exactly the trainable group ("train.*")
  Checkpoint ck = Checkpoint::load(adir.path + "/ckpt_1.bin");
  std::int64_t trained = 0;
  for (const auto& [name, t] : ck.tensors)
    if (name.rfind("train.adapter.", 0) == 0) trained += t.size();
  adapter::AdapterSpec spec{8, 6, 4, adapter::Variant::shuffle};
  CHECK(trained == adapter::expected_param_count(spec));
}

TEST_CASE("resume from a checkpoint reproduces the straight run bit-wise") {
  TmpDir a("resume_a"), b("resume_b");
  tr::TrainConfig base = tiny_codec(a.path, "mse", "");
  base.steps = 10;
  base.ckpt_every = 5;
  auto full = tr::train_codec(base);

  // same config resumed from the mid-run checkpoint into a fresh directory
  tr::TrainConfig rest = base;
  rest.run_dir = b.path;
  rest.resume_from = a.path + "/ckpt_5.bin";
  auto resumed = tr::train_codec(rest);

  Checkpoint ck_full = Checkpoint::load(full.final_ckpt);
  Checkpoint ck_res = Checkpoint::load(resumed.final_ckpt);
  REQUIRE(ck_full.tensors.size() == ck_res.tensors.size());
  for (const auto& [name, t] : ck_full.tensors) {
    const Tensor& r = ck_res.get(name);
    REQUIRE(t.same_shape(r));
    for (std::int64_t i = 0; i < t.size(); ++i) {
      if (t[i] != r[i]) {
        CHECK_MESSAGE(false, name, " differs at ", i);
        return;
      }
    }
  }
  CHECK(true);
}

TEST_CASE("divergence guard aborts with a pointer to the last good checkpoint") {
  TmpDir a("diverge");
  tr::TrainConfig c = tiny_codec(a.path, "mse", "");
  c.steps = 4;
  c.ckpt_every = 2;
  auto sum = tr::train_codec(c);
  // poison one weight and resume
  Checkpoint ck = Checkpoint::load(sum.final_ckpt);
  Tensor w = ck.get("codec.dec.u4.b");
  w[0] = std::numeric_limits<double>::quiet_NaN();
  ck.tensors["codec.dec.u4.b"] = w;
  ck.save(a.path + "/poisoned.bin");
  tr::TrainConfig r = c;
  r.resume_from = a.path + "/poisoned.bin";
  r.steps = 6;
  CHECK_THROWS_AS(tr::train_codec(r), DivergenceError);
}

TEST_CASE("default distillation weights follow the family magnitudes") {
  CHECK(tr::default_lambda_dist(vision::Family::conv_stem) == 0.01);
  CHECK(tr::default_lambda_dist(vision::Family::patch_stem) == 0.01);
  CHECK(tr::default_lambda_dist(vision::Family::isotropic) == 0.1);
  CHECK(tr::default_lambda_dist(vision::Family::seg) == 10.0);
}
