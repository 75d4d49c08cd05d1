#pragma once

#include <string>
#include <vector>

#include "polc/image.hpp"
#include "polc/rng.hpp"

namespace polc::data {

struct Sample {
  ImageBuffer image;
  int label = -1;          // class id, or -1 for unlabeled streams
  std::vector<int> mask;   // empty, or H*W row-major ids with 255 = ignore
};

inline constexpr int kClsClasses = 10;
inline constexpr int kClsSize = 64;
inline constexpr int kSegClasses = 5;  // foreground ids 1..5, background 0
inline constexpr int kSegSize = 128;

// Anti-aliased synthetic shape corpus, fully determined by the seed.
// task "cls": 10 shape classes at 64x64, emitted round-robin (stratified).
// task "seg": 1..3 shapes per 128x128 image, mask ids {0..5} plus 255 on
// anti-aliased boundaries.
std::vector<Sample> synth_shapes(int n, const std::string& task, std::uint64_t seed);

// Heavily textured eval images (noise / stripe / checker fields around a
// smooth object) for bit-allocation analysis.
std::vector<ImageBuffer> synth_textured(int n, int size, std::uint64_t seed);

std::vector<std::string> list_image_files(const std::string& dir);

// Deterministic epoch-ordered patch stream over an image folder. Without
// augmentation: center crops in sorted-filename order. With augmentation:
// random crop + horizontal flip, crop parameters drawn from the stream rng.
// Images smaller than the patch are reflect-padded first.
class FolderStream {
 public:
  FolderStream(const std::string& path, int patch, bool augment, std::uint64_t seed);
  Sample next();
  std::size_t images_per_epoch() const { return images_.size(); }

 private:
  std::vector<ImageBuffer> images_;
  int patch_;
  bool augment_;
  Rng rng_;
  std::size_t pos_ = 0;
};

// Random crop + optional horizontal flip used by training batches.
ImageBuffer random_patch(const ImageBuffer& img, int patch, bool augment, Rng& rng);

}  // namespace polc::data
