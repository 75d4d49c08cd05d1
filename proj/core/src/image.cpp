#include "polc/image.hpp"

#include <cmath>
#include <vector>

namespace polc {

ImageBuffer::ImageBuffer(Tensor t) : pix(std::move(t)) {
  POLC_CHECK_T(pix.ndim() == 3 && pix.dim(0) == 3, SpecError, "ImageBuffer wants a (3,H,W) tensor");
}

void ImageBuffer::validate() const {
  for (std::int64_t i = 0; i < pix.size(); ++i) {
    const double v = pix[i];
    POLC_CHECK_T(std::isfinite(v) && v >= 0.0 && v <= 1.0, SpecError, "image values must be finite in [0,1]");
  }
}

namespace {
// reflect index without repeating the edge sample (abcb|a pattern)
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}
}  // namespace

std::pair<ImageBuffer, std::pair<int, int>> pad_to_multiple(const ImageBuffer& x, int m) {
  const int h = x.height(), w = x.width();
  const int ph = (h + m - 1) / m * m;
  const int pw = (w + m - 1) / m * m;
  if (ph == h && pw == w) return {x, {h, w}};
  ImageBuffer out(ph, pw);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < ph; ++y)
      for (int xx = 0; xx < pw; ++xx)
        out.pix.at({c, y, xx}) = x.pix.at({c, reflect(y, h), reflect(xx, w)});
  return {out, {h, w}};
}

ImageBuffer crop(const ImageBuffer& x, int h, int w) {
  POLC_CHECK_T(h <= x.height() && w <= x.width() && h > 0 && w > 0, SpecError, "crop larger than image");
  if (h == x.height() && w == x.width()) return x;
  ImageBuffer out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) out.pix.at({c, y, xx}) = x.pix.at({c, y, xx});
  return out;
}

Tensor stack_images(const std::vector<ImageBuffer>& xs) {
  POLC_CHECK(!xs.empty(), "stack_images: empty batch");
  const int h = xs[0].height(), w = xs[0].width();
  Tensor out({static_cast<int>(xs.size()), 3, h, w});
  const std::int64_t one = static_cast<std::int64_t>(3) * h * w;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    POLC_CHECK(xs[i].height() == h && xs[i].width() == w, "stack_images: mixed sizes");
    for (std::int64_t j = 0; j < one; ++j) out[static_cast<std::int64_t>(i) * one + j] = xs[i].pix[j];
  }
  return out;
}

ImageBuffer image_from_batch(const Tensor& batch, int index) {
  POLC_CHECK(batch.ndim() == 4 && batch.dim(1) == 3, "image_from_batch: want (N,3,H,W)");
  const int h = batch.dim(2), w = batch.dim(3);
  ImageBuffer out(h, w);
  const std::int64_t one = static_cast<std::int64_t>(3) * h * w;
  for (std::int64_t j = 0; j < one; ++j) out.pix[j] = batch[static_cast<std::int64_t>(index) * one + j];
  return out;
}

}  // namespace polc
