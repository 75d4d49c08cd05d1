#pragma once

#include "polc/adapter.hpp"
#include "polc/bitstream.hpp"
#include "polc/datasets.hpp"

namespace polc::eval {

// 10*log10(1/MSE) on unit-range images; identical images report the 99 dB cap.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

double top1(const std::vector<int>& predictions, const std::vector<int>& labels);

// mean IoU over classes present in the labels; pixels labeled `ignore` are
// skipped and absent classes are excluded rather than counted as zero.
double miou(const std::vector<int>& predictions, const std::vector<int>& labels, int num_classes,
            int ignore = 255);

// spatial average over the latent grid -> (C,) descriptor
Tensor pooled_latent(const LatentCode& z);

struct ProbeResult {
  double probe_acc = 0;
  double silhouette = 0;
};

// Fixed recipe (v1, keep stable across runs): standardize pooled vectors with
// train-split statistics, 80/20 split by a seeded shuffle, linear softmax
// probe trained 200 epochs full-batch with Adam(0.05); silhouette coefficient
// with Euclidean distance over all vectors.
ProbeResult latent_discriminability(const std::vector<Tensor>& pooled, const std::vector<int>& labels,
                                    int num_classes, std::uint64_t seed = 0x9E0B);

// per-site information content: sum over channels of -log2 p, shape (h,w)
Tensor bit_allocation_map(const Codec& codec, const LatentCode& z);
void write_bit_allocation(const Tensor& map_hw, const std::string& csv_path, const std::string& png_path);
double spatial_variance(const Tensor& map_hw);

std::int64_t count_params(const nn::ParamList& ps);

// Closed-form MAC-based count (1 MAC = 2 FLOPs): conv 2*k^2*cin*cout*oh*ow,
// linear 2*cin*cout*sites, tconv 2*k^2*cin*cout*(oh/k)*(ow/k). Pool, act,
// shuffle, upsample and concat count zero. Anything else is an error.
double count_flops(const std::vector<vision::LayerDesc>& layers);

struct SweepRow {
  int rate_index = 0;
  std::string model;  // vision family or "codec"
  std::string mode;   // checkpoint tag (polc / mse / ...)
  double bpp = 0;     // measured from file bytes
  double psnr = 0;
  double perc = 0;
  double task_metric = -1;  // top1 or miou; -1 if no task model
  std::int64_t trainable_params = 0;
  double flops = 0;
};

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

// Encode -> .polc bytes -> decode for every rate point; file size is the bpp
// source of truth. If a task checkpoint is given, also runs compressed-domain
// inference.
struct SweepInputs {
  const Codec* codec = nullptr;
  const adapter::Adapter* adp = nullptr;        // optional
  const vision::VisionModel* student = nullptr; // optional
  const vision::VisionModel* perc_net = nullptr;  // optional
  std::string mode_tag = "polc";
  std::string tmp_dir = "/tmp";
};

std::vector<SweepRow> sweep(const SweepInputs& in, const std::vector<data::Sample>& eval_set);

}  // namespace polc::eval
