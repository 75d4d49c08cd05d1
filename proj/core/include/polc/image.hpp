#pragma once

#include <utility>
#include <vector>

#include "polc/tensor.hpp"

namespace polc {

// RGB image with unit-range values, stored channel-major (3,H,W).
struct ImageBuffer {
  Tensor pix;  // (3,H,W), values in [0,1]

  ImageBuffer() = default;
  explicit ImageBuffer(Tensor t);
  ImageBuffer(int h, int w) : pix(Tensor({3, h, w})) {}

  int height() const { return pix.dim(1); }
  int width() const { return pix.dim(2); }
  bool divisible_by(int m) const { return height() % m == 0 && width() % m == 0; }

  void validate() const;  // finite, in [0,1]
};

// Reflect-pads right/bottom so both dims are multiples of m; returns the
// padded image and the original (h,w) so the decode path can crop back.
std::pair<ImageBuffer, std::pair<int, int>> pad_to_multiple(const ImageBuffer& x, int m = 16);

ImageBuffer crop(const ImageBuffer& x, int h, int w);

// Batch helpers: (3,H,W) images <-> (N,3,H,W) tensors.
Tensor stack_images(const std::vector<ImageBuffer>& xs);
ImageBuffer image_from_batch(const Tensor& batch, int index);

}  // namespace polc
