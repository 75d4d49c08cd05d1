#include "polc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "polc/image_io.hpp"
#include "polc/objectives.hpp"

namespace polc::eval {

namespace o = ops;

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  POLC_CHECK_T(a.pix.same_shape(b.pix), SpecError, "psnr: shape mismatch");
  const double m = o::t_mse(a.pix, b.pix);
  if (m <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

double top1(const std::vector<int>& predictions, const std::vector<int>& labels) {
  POLC_CHECK(predictions.size() == labels.size() && !labels.empty(), "top1: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (predictions[i] == labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double miou(const std::vector<int>& predictions, const std::vector<int>& labels, int num_classes, int ignore) {
  POLC_CHECK(predictions.size() == labels.size() && !labels.empty(), "miou: size mismatch");
  std::vector<std::int64_t> inter(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> uni(static_cast<std::size_t>(num_classes), 0);
  std::vector<bool> present(static_cast<std::size_t>(num_classes), false);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int lbl = labels[i];
    if (lbl == ignore) continue;
    POLC_CHECK(lbl >= 0 && lbl < num_classes, "miou: label out of range");
    const int prd = predictions[i];
    present[static_cast<std::size_t>(lbl)] = true;
    if (prd == lbl) {
      ++inter[static_cast<std::size_t>(lbl)];
      ++uni[static_cast<std::size_t>(lbl)];
    } else {
      ++uni[static_cast<std::size_t>(lbl)];
      if (prd >= 0 && prd < num_classes) ++uni[static_cast<std::size_t>(prd)];
    }
  }
  double sum = 0;
  int cnt = 0;
  for (int c = 0; c < num_classes; ++c)
    if (present[static_cast<std::size_t>(c)]) {
      sum += uni[static_cast<std::size_t>(c)] > 0
                 ? static_cast<double>(inter[static_cast<std::size_t>(c)]) /
                       static_cast<double>(uni[static_cast<std::size_t>(c)])
                 : 0.0;
      ++cnt;
    }
  POLC_CHECK(cnt > 0, "miou: no labeled pixels");
  return sum / cnt;
}

Tensor pooled_latent(const LatentCode& z) {
  const int c = z.channels();
  const std::int64_t plane = static_cast<std::int64_t>(z.h()) * z.w();
  Tensor out({c});
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (std::int64_t i = 0; i < plane; ++i) acc += z.values[ch * plane + i];
    out[ch] = acc / static_cast<double>(plane);
  }
  return out;
}

ProbeResult latent_discriminability(const std::vector<Tensor>& pooled, const std::vector<int>& labels,
                                    int num_classes, std::uint64_t seed) {
  POLC_CHECK_T(num_classes >= 2, SpecError, "latent_discriminability needs at least 2 classes");
  POLC_CHECK(pooled.size() == labels.size() && pooled.size() >= 10, "probe: too few samples");
  const int n = static_cast<int>(pooled.size());
  const int d = static_cast<int>(pooled[0].size());

  // --- probe recipe v1 ---
  Rng rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1))]);
  const int ntr = n * 4 / 5;
  const int nte = n - ntr;
  POLC_CHECK(nte > 0, "probe: eval split empty");

  // standardize by train statistics
  std::vector<double> mu(static_cast<std::size_t>(d), 0), sd(static_cast<std::size_t>(d), 0);
  for (int i = 0; i < ntr; ++i)
    for (int j = 0; j < d; ++j) mu[static_cast<std::size_t>(j)] += pooled[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])][j];
  for (auto& v : mu) v /= ntr;
  for (int i = 0; i < ntr; ++i)
    for (int j = 0; j < d; ++j) {
      const double t = pooled[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])][j] - mu[static_cast<std::size_t>(j)];
      sd[static_cast<std::size_t>(j)] += t * t;
    }
  for (auto& v : sd) v = std::sqrt(v / std::max(1, ntr - 1)) + 1e-8;

  auto feat = [&](int idx, int j) {
    return (pooled[static_cast<std::size_t>(idx)][j] - mu[static_cast<std::size_t>(j)]) / sd[static_cast<std::size_t>(j)];
  };

  Tensor xtr({ntr, d}), xte({nte, d});
  std::vector<int> ytr, yte;
  for (int i = 0; i < ntr; ++i) {
    const int idx = order[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) xtr[static_cast<std::int64_t>(i) * d + j] = feat(idx, j);
    ytr.push_back(labels[static_cast<std::size_t>(idx)]);
  }
  for (int i = 0; i < nte; ++i) {
    const int idx = order[static_cast<std::size_t>(ntr + i)];
    for (int j = 0; j < d; ++j) xte[static_cast<std::int64_t>(i) * d + j] = feat(idx, j);
    yte.push_back(labels[static_cast<std::size_t>(idx)]);
  }

  Rng wrng(seed ^ 0xABCD);
  Var w = nn::param(Tensor::randn({num_classes, d}, wrng, 0.01));
  Var b = nn::param(Tensor::zeros({num_classes}));
  nn::ParamList ps{{"w", w}, {"b", b}};
  nn::Adam opt(ps);
  Var xtr_leaf = make_leaf(xtr);
  for (int epoch = 0; epoch < 200; ++epoch) {
    nn::zero_grads(ps);
    backward(o::cross_entropy_cls(o::linear(xtr_leaf, w, b), ytr));
    opt.step(0.05);
  }
  Var logits = o::linear(make_leaf(xte), w, b);
  int hit = 0;
  for (int i = 0; i < nte; ++i) {
    int arg = 0;
    double best = logits->value[static_cast<std::int64_t>(i) * num_classes];
    for (int j = 1; j < num_classes; ++j) {
      const double v = logits->value[static_cast<std::int64_t>(i) * num_classes + j];
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    if (arg == yte[static_cast<std::size_t>(i)]) ++hit;
  }

  // --- silhouette (raw pooled vectors, Euclidean) ---
  auto dist = [&](int a2, int b2) {
    double s = 0;
    for (int j = 0; j < d; ++j) {
      const double t = pooled[static_cast<std::size_t>(a2)][j] - pooled[static_cast<std::size_t>(b2)][j];
      s += t * t;
    }
    return std::sqrt(s);
  };
  std::vector<int> class_count(static_cast<std::size_t>(num_classes), 0);
  for (int lbl : labels) class_count[static_cast<std::size_t>(lbl)]++;
  double sil = 0;
  for (int i = 0; i < n; ++i) {
    const int li = labels[static_cast<std::size_t>(i)];
    if (class_count[static_cast<std::size_t>(li)] <= 1) continue;  // convention: s(i)=0
    double a_sum = 0;
    std::vector<double> b_sum(static_cast<std::size_t>(num_classes), 0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dv = dist(i, j);
      if (labels[static_cast<std::size_t>(j)] == li)
        a_sum += dv;
      else
        b_sum[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += dv;
    }
    const double a = a_sum / (class_count[static_cast<std::size_t>(li)] - 1);
    double bmin = std::numeric_limits<double>::infinity();
    for (int cl = 0; cl < num_classes; ++cl) {
      if (cl == li || class_count[static_cast<std::size_t>(cl)] == 0) continue;
      bmin = std::min(bmin, b_sum[static_cast<std::size_t>(cl)] / class_count[static_cast<std::size_t>(cl)]);
    }
    if (!std::isfinite(bmin)) continue;
    sil += (bmin - a) / std::max(a, bmin);
  }
  ProbeResult r;
  r.probe_acc = static_cast<double>(hit) / nte;
  r.silhouette = sil / n;
  return r;
}

Tensor bit_allocation_map(const Codec& codec, const LatentCode& z) {
  Tensor p = codec.likelihoods(z);
  const int c = z.channels(), h = z.h(), w = z.w();
  Tensor map({h, w});
  for (int ch = 0; ch < c; ++ch)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i)
      map[i] += -std::log2(p[static_cast<std::int64_t>(ch) * h * w + i]);
  return map;
}

void write_bit_allocation(const Tensor& map_hw, const std::string& csv_path, const std::string& png_path) {
  std::ofstream os(csv_path);
  POLC_CHECK_T(os.good(), IoError, "cannot write " + csv_path);
  os.precision(10);
  for (int y = 0; y < map_hw.dim(0); ++y) {
    for (int x = 0; x < map_hw.dim(1); ++x) os << (x ? "," : "") << map_hw.at({y, x});
    os << "\n";
  }
  const double lo = map_hw.min(), hi = map_hw.max();
  Tensor scaled(map_hw.shape());
  for (std::int64_t i = 0; i < map_hw.size(); ++i)
    scaled[i] = hi > lo ? (map_hw[i] - lo) / (hi - lo) : 0.5;
  write_gray(png_path, scaled);
}

double spatial_variance(const Tensor& map_hw) {
  const std::int64_t n = map_hw.size();
  double mu = 0;
  for (std::int64_t i = 0; i < n; ++i) mu += map_hw[i];
  mu /= static_cast<double>(n);
  double var = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = map_hw[i] - mu;
    var += t * t;
  }
  return var / static_cast<double>(n);
}

std::int64_t count_params(const nn::ParamList& ps) {
  std::int64_t n = 0;
  for (const auto& p : ps) n += p.v->value.size();
  return n;
}

double count_flops(const std::vector<vision::LayerDesc>& layers) {
  using vision::LayerKind;
  double total = 0;
  for (const auto& l : layers) {
    const double sites = static_cast<double>(l.out_h) * l.out_w;
    switch (l.kind) {
      case LayerKind::conv:
        total += 2.0 * l.k * l.k * l.cin * l.cout * sites;
        break;
      case LayerKind::linear:
        total += 2.0 * l.cin * l.cout * sites;
        break;
      case LayerKind::tconv:
        // kernel r / stride r: each input site feeds k^2 outputs
        total += 2.0 * l.k * l.k * l.cin * l.cout * (sites / (static_cast<double>(l.k) * l.k));
        break;
      case LayerKind::pool:
      case LayerKind::act:
      case LayerKind::shuffle:
      case LayerKind::upsample:
      case LayerKind::concat:
        break;  // no multiply-accumulates under the MAC convention
      default:
        throw SpecError("count_flops: unknown layer kind");
    }
  }
  return total;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream os(path);
  POLC_CHECK_T(os.good(), IoError, "cannot write " + path);
  os << "rate_index,model,mode,bpp,psnr,perc,task_metric,trainable_params,flops\n";
  os.precision(10);
  for (const auto& r : rows)
    os << r.rate_index << "," << r.model << "," << r.mode << "," << r.bpp << "," << r.psnr << "," << r.perc
       << "," << r.task_metric << "," << r.trainable_params << "," << r.flops << "\n";
}

std::vector<SweepRow> sweep(const SweepInputs& in, const std::vector<data::Sample>& eval_set) {
  POLC_CHECK_T(in.codec != nullptr, SpecError, "sweep: codec required");
  POLC_CHECK(!eval_set.empty(), "sweep: empty eval set");
  std::vector<SweepRow> rows;
  const std::string tmp = in.tmp_dir + "/polc_sweep_tmp.polc";
  const bool task = in.adp != nullptr && in.student != nullptr;
  const bool seg = task && in.student->config().family == vision::Family::seg;
  for (int idx = 0; idx < kNumRatePoints; ++idx) {
    SweepRow row;
    row.rate_index = idx;
    row.mode = in.mode_tag;
    row.model = task ? vision::family_name(in.student->config().family) : "codec";
    double bits_total = 0, px_total = 0;
    std::vector<int> preds, labels;
    for (const auto& s : eval_set) {
      const ImageBuffer& img = s.image;
      LatentCode z = in.codec->quantize(in.codec->encode(img, rate_point(idx)), QuantizeMode::round);
      Bitstream bs = write_stream(z, img.height(), img.width(), task ? in.student->config().model_id : 0,
                                  *in.codec);
      bs.save(tmp);
      bits_total += static_cast<double>(std::filesystem::file_size(tmp)) * 8.0;
      px_total += static_cast<double>(img.height()) * img.width();
      LatentCode zr = read_stream(Bitstream::load(tmp), *in.codec);
      ImageBuffer xh = in.codec->decode(zr, rate_point(idx));
      row.psnr += psnr(img, xh);
      if (in.perc_net) {
        Var pv = objectives::perc_distance(
            make_leaf(img.pix.reshaped({1, 3, img.height(), img.width()})),
            make_leaf(xh.pix.reshaped({1, 3, img.height(), img.width()})), *in.perc_net);
        row.perc += pv->value[0];
      }
      if (task) {
        Var f = in.adp->forward(
            in.codec->apply_inv_gain(make_leaf(zr.values.reshaped({1, zr.channels(), zr.h(), zr.w()})), idx));
        auto out = in.student->forward_from_features(f);
        if (seg) {
          const int k = out.pred->value.dim(1);
          const std::int64_t plane = static_cast<std::int64_t>(out.pred->value.dim(2)) * out.pred->value.dim(3);
          for (std::int64_t px = 0; px < plane; ++px) {
            int arg = 0;
            double best = out.pred->value[px];
            for (int j = 1; j < k; ++j) {
              const double v = out.pred->value[static_cast<std::int64_t>(j) * plane + px];
              if (v > best) {
                best = v;
                arg = j;
              }
            }
            preds.push_back(arg);
          }
          labels.insert(labels.end(), s.mask.begin(), s.mask.end());
        } else {
          const int k = out.pred->value.dim(1);
          int arg = 0;
          double best = out.pred->value[0];
          for (int j = 1; j < k; ++j)
            if (out.pred->value[j] > best) {
              best = out.pred->value[j];
              arg = j;
            }
          preds.push_back(arg);
          labels.push_back(s.label);
        }
      }
    }
    row.bpp = bits_total / px_total;
    row.psnr /= static_cast<double>(eval_set.size());
    row.perc /= static_cast<double>(eval_set.size());
    if (task) {
      row.task_metric = seg ? miou(preds, labels, in.student->config().num_classes) : top1(preds, labels);
      row.trainable_params = count_params(const_cast<adapter::Adapter*>(in.adp)->params());
      const int ih = eval_set.front().image.height(), iw = eval_set.front().image.width();
      auto ls = in.adp->layers(ih / kLatentDivisor, iw / kLatentDivisor);
      auto vl = in.student->layers(ih, iw);
      ls.insert(ls.end(), vl.begin(), vl.end());
      row.flops = count_flops(ls);
    }
    rows.push_back(row);
  }
  std::filesystem::remove(tmp);
  return rows;
}

}  // namespace polc::eval
