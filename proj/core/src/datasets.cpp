#include "polc/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "polc/image_io.hpp"

namespace polc::data {

namespace {

struct Vec2 {
  double x, y;
};

double sd_disk(Vec2 p) { return std::hypot(p.x, p.y) - 1.0; }
double sd_square(Vec2 p) { return std::max(std::fabs(p.x), std::fabs(p.y)) - 1.0; }
double sd_diamond(Vec2 p) { return (std::fabs(p.x) + std::fabs(p.y)) - 1.0; }
double sd_ring(Vec2 p) { return std::fabs(std::hypot(p.x, p.y) - 0.72) - 0.28; }
double sd_cross(Vec2 p) {
  const double ax = std::fabs(p.x), ay = std::fabs(p.y);
  return std::min(std::max(ax - 1.0, ay - 0.34), std::max(ay - 1.0, ax - 0.34));
}
double sd_triangle(Vec2 p) {
  // equilateral triangle via three outward half planes
  const double k = 0.8660254037844386;  // sqrt(3)/2
  double d = p.y - 0.6;
  d = std::max(d, -p.y * 0.5 - p.x * k - 0.45);
  d = std::max(d, -p.y * 0.5 + p.x * k - 0.45);
  return d;
}
double sd_star(Vec2 p) {
  const double r = std::hypot(p.x, p.y);
  double a = std::atan2(p.y, p.x);
  const double seg = 6.283185307179586 / 5.0;
  double frac = std::fmod(a + 6.283185307179586, seg) / seg;  // 0..1 within a point
  const double spike = std::fabs(frac - 0.5) * 2.0;           // 0 at spike tip
  const double radius = 0.45 + 0.55 * (1.0 - spike);
  return r - radius;
}
double sd_hexagon(Vec2 p) {
  const double ax = std::fabs(p.x), ay = std::fabs(p.y);
  return std::max(ax * 0.8660254 + ay * 0.5, ay) - 0.9;
}
double sd_ellipse(Vec2 p) { return std::hypot(p.x, p.y / 0.58) - 1.0; }
double sd_crescent(Vec2 p) {
  const double outer = sd_disk(p);
  const double inner = std::hypot(p.x - 0.55, p.y) / 0.82 - 1.0;
  return std::max(outer, -inner);
}

double shape_sdf(int cls, Vec2 p) {
  switch (cls) {
    case 0:
      return sd_disk(p);
    case 1:
      return sd_square(p);
    case 2:
      return sd_triangle(p);
    case 3:
      return sd_ring(p);
    case 4:
      return sd_cross(p);
    case 5:
      return sd_star(p);
    case 6:
      return sd_diamond(p);
    case 7:
      return sd_hexagon(p);
    case 8:
      return sd_ellipse(p);
    case 9:
      return sd_crescent(p);
    default:
      throw SpecError("shape class out of range");
  }
}

struct Paint {
  double rgb[3];
  int texture;      // 0 solid, 1 stripes, 2 checker, 3 noise
  double tex_freq;  // cycles across the shape
  double tex_amp;
  double angle;
};

double tex_value(const Paint& p, double u, double v, Rng& pixel_noise) {
  switch (p.texture) {
    case 1:
      return p.tex_amp * std::sin(p.tex_freq * u);
    case 2:
      return p.tex_amp * (std::sin(p.tex_freq * u) * std::sin(p.tex_freq * v) > 0 ? 1.0 : -1.0) * 0.5;
    case 3:
      return p.tex_amp * (pixel_noise.uniform() - 0.5);
    default:
      return 0.0;
  }
}

Paint random_paint(Rng& rng, bool allow_texture) {
  Paint p;
  for (double& c : p.rgb) c = rng.uniform(0.05, 0.95);
  p.texture = allow_texture ? static_cast<int>(rng.uniform_int(4)) : 0;
  p.tex_freq = rng.uniform(4.0, 14.0);
  p.tex_amp = rng.uniform(0.08, 0.3);
  p.angle = rng.uniform(0.0, 6.283185307179586);
  return p;
}

struct Placement {
  double cx, cy, scale, rot;
};

Placement random_placement(Rng& rng, int size) {
  Placement pl;
  pl.cx = size * rng.uniform(0.38, 0.62);
  pl.cy = size * rng.uniform(0.38, 0.62);
  pl.scale = size * rng.uniform(0.22, 0.34);
  pl.rot = rng.uniform(0.0, 6.283185307179586);
  return pl;
}

// renders one shape over an image; cov_out (optional) receives the coverage
void render_shape(ImageBuffer& img, int cls, const Placement& pl, const Paint& paint, Rng& pixel_noise,
                  std::vector<double>* cov_out) {
  const int size = img.height();
  const double cs = std::cos(pl.rot), sn = std::sin(pl.rot);
  const std::int64_t plane = static_cast<std::int64_t>(size) * img.width();
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < img.width(); ++x) {
      const double dx = (x + 0.5 - pl.cx) / pl.scale;
      const double dy = (y + 0.5 - pl.cy) / pl.scale;
      Vec2 p{cs * dx + sn * dy, -sn * dx + cs * dy};
      const double d = shape_sdf(cls, p) * pl.scale;  // back to pixel units
      const double cov = std::clamp(0.5 - d / 1.5, 0.0, 1.0);
      if (cov_out) (*cov_out)[static_cast<std::size_t>(y) * img.width() + x] = cov;
      if (cov <= 0.0) {
        (void)tex_value(paint, 0, 0, pixel_noise);  // keep the pixel-noise stream aligned
        continue;
      }
      const double t = tex_value(paint, p.x * 3.1415926, p.y * 3.1415926, pixel_noise);
      for (int c = 0; c < 3; ++c) {
        const std::int64_t i = c * plane + static_cast<std::int64_t>(y) * img.width() + x;
        const double fg = std::clamp(paint.rgb[c] + t, 0.0, 1.0);
        img.pix[i] = (1.0 - cov) * img.pix[i] + cov * fg;
      }
    }
}

void render_background(ImageBuffer& img, Rng& rng) {
  const int kind = static_cast<int>(rng.uniform_int(4));
  double a[3], b[3];
  for (int c = 0; c < 3; ++c) {
    a[c] = rng.uniform(0.05, 0.95);
    b[c] = rng.uniform(0.05, 0.95);
  }
  const double noise_amp = rng.uniform(0.02, 0.12);
  const std::int64_t plane = static_cast<std::int64_t>(img.height()) * img.width();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double t;
      switch (kind) {
        case 0:
          t = 0.0;
          break;  // solid
        case 1:
          t = static_cast<double>(y) / img.height();
          break;  // vertical gradient
        case 2:
          t = 0.5 + 0.5 * std::sin(0.35 * x) * std::sin(0.35 * y);
          break;  // soft lattice
        default:
          t = rng.uniform();  // noise field
      }
      for (int c = 0; c < 3; ++c) {
        double v = (1.0 - t) * a[c] + t * b[c];
        if (kind == 3) v = a[c] + noise_amp * (t - 0.5) + 0.5 * noise_amp * (rng.uniform() - 0.5);
        img.pix[c * plane + static_cast<std::int64_t>(y) * img.width() + x] = std::clamp(v, 0.0, 1.0);
      }
    }
}

}  // namespace

std::vector<Sample> synth_shapes(int n, const std::string& task, std::uint64_t seed) {
  POLC_CHECK_T(task == "cls" || task == "seg", SpecError, "synth_shapes task must be cls or seg");
  Rng rng = Rng::stream(seed, task == "cls" ? 0xC15 : 0x5E6);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  if (task == "cls") {
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.image = ImageBuffer(kClsSize, kClsSize);
      render_background(s.image, rng);
      s.label = i % kClsClasses;  // stratified round-robin
      render_shape(s.image, s.label, random_placement(rng, kClsSize), random_paint(rng, true), rng, nullptr);
      out.push_back(std::move(s));
    }
  } else {
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.image = ImageBuffer(kSegSize, kSegSize);
      render_background(s.image, rng);
      s.mask.assign(static_cast<std::size_t>(kSegSize) * kSegSize, 0);
      const int shapes = 1 + static_cast<int>(rng.uniform_int(3));
      for (int k = 0; k < shapes; ++k) {
        const int cls = static_cast<int>(rng.uniform_int(kSegClasses));  // sdf ids 0..4
        Placement pl = random_placement(rng, kSegSize);
        pl.cx = kSegSize * rng.uniform(0.2, 0.8);
        pl.cy = kSegSize * rng.uniform(0.2, 0.8);
        pl.scale = kSegSize * rng.uniform(0.12, 0.22);
        std::vector<double> cov(static_cast<std::size_t>(kSegSize) * kSegSize);
        render_shape(s.image, cls, pl, random_paint(rng, true), rng, &cov);
        for (std::size_t px = 0; px < cov.size(); ++px) {
          if (cov[px] >= 0.8)
            s.mask[px] = cls + 1;  // mask ids 1..5
          else if (cov[px] > 0.2)
            s.mask[px] = 255;  // anti-aliased boundary: ignore
        }
      }
      s.label = -1;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<ImageBuffer> synth_textured(int n, int size, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x7E7);
  std::vector<ImageBuffer> out;
  for (int i = 0; i < n; ++i) {
    ImageBuffer img(size, size);
    const std::int64_t plane = static_cast<std::int64_t>(size) * size;
    // strongly textured field
    double base[3];
    for (double& c : base) c = rng.uniform(0.2, 0.8);
    const int kind = static_cast<int>(rng.uniform_int(3));
    const double freq = rng.uniform(0.6, 1.6);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        double t;
        if (kind == 0)
          t = rng.uniform() - 0.5;
        else if (kind == 1)
          t = 0.5 * std::sin(freq * x) * std::sin(freq * y);
        else
          t = ((x / 4 + y / 4) % 2 == 0 ? 0.25 : -0.25) + 0.3 * (rng.uniform() - 0.5);
        for (int c = 0; c < 3; ++c)
          img.pix[c * plane + static_cast<std::int64_t>(y) * size + x] = std::clamp(base[c] + 0.45 * t, 0.0, 1.0);
      }
    // one smooth object on top
    render_shape(img, static_cast<int>(rng.uniform_int(10)), random_placement(rng, size),
                 random_paint(rng, false), rng, nullptr);
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<std::string> list_image_files(const std::string& dir) {
  namespace fs = std::filesystem;
  POLC_CHECK_T(fs::is_directory(dir), IoError, "not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

ImageBuffer random_patch(const ImageBuffer& img, int patch, bool augment, Rng& rng) {
  ImageBuffer src = img;
  if (src.height() < patch || src.width() < patch) {
    // reflect-pad to the next multiple of the patch edge, guaranteeing room
    src = pad_to_multiple(src, patch).first;
  }
  const int maxy = src.height() - patch, maxx = src.width() - patch;
  int y0, x0;
  bool flip = false;
  if (augment) {
    y0 = maxy > 0 ? static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(maxy) + 1)) : 0;
    x0 = maxx > 0 ? static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(maxx) + 1)) : 0;
    flip = rng.uniform() < 0.5;
  } else {
    y0 = maxy / 2;
    x0 = maxx / 2;
  }
  ImageBuffer out(patch, patch);
  const std::int64_t splane = static_cast<std::int64_t>(src.height()) * src.width();
  const std::int64_t oplane = static_cast<std::int64_t>(patch) * patch;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < patch; ++y)
      for (int x = 0; x < patch; ++x) {
        const int sx = flip ? (x0 + patch - 1 - x) : (x0 + x);
        out.pix[c * oplane + static_cast<std::int64_t>(y) * patch + x] =
            src.pix[c * splane + static_cast<std::int64_t>(y0 + y) * src.width() + sx];
      }
  return out;
}

FolderStream::FolderStream(const std::string& path, int patch, bool augment, std::uint64_t seed)
    : patch_(patch), augment_(augment), rng_(Rng::stream(seed, 0xF01D)) {
  auto files = list_image_files(path);
  for (const auto& f : files) {
    try {
      images_.push_back(read_image(f));
    } catch (const Error& e) {
      std::fprintf(stderr, "[polc] warning: skipping unreadable image %s (%s)\n", f.c_str(), e.what());
    }
  }
  POLC_CHECK_T(!images_.empty(), IoError, "no readable images in " + path);
}

Sample FolderStream::next() {
  const ImageBuffer& img = images_[pos_];
  pos_ = (pos_ + 1) % images_.size();
  Sample s;
  s.image = random_patch(img, patch_, augment_, rng_);
  s.label = -1;
  return s;
}

}  // namespace polc::data
