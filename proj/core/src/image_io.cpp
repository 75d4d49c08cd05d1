#include "polc/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace polc {

namespace {

ImageBuffer from_rgb8(const std::vector<unsigned char>& rgb, int h, int w) {
  ImageBuffer img(h, w);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (std::int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) img.pix[c * plane + i] = rgb[static_cast<std::size_t>(i * 3 + c)] / 255.0;
  return img;
}

std::vector<unsigned char> to_rgb8(const ImageBuffer& img) {
  const std::int64_t plane = static_cast<std::int64_t>(img.height()) * img.width();
  std::vector<unsigned char> rgb(static_cast<std::size_t>(plane) * 3);
  for (std::int64_t i = 0; i < plane; ++i)
    for (int c = 0; c < 3; ++c) {
      double v = img.pix[c * plane + i];
      v = v < 0 ? 0 : (v > 1 ? 1 : v);
      rgb[static_cast<std::size_t>(i * 3 + c)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  return rgb;
}

ImageBuffer read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  POLC_CHECK_T(fp, IoError, "cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw FormatError("png decode failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  std::vector<unsigned char> rgb(static_cast<std::size_t>(h) * w * 3);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return from_rgb8(rgb, h, w);
}

void write_png_rgb(const std::string& path, const unsigned char* data, int h, int w, int channels) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  POLC_CHECK_T(fp, IoError, "cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("png encode failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

struct JpegErr {
  jpeg_error_mgr pub;
  std::jmp_buf jmp;
};

void jpeg_err_exit(j_common_ptr cinfo) {
  auto* e = reinterpret_cast<JpegErr*>(cinfo->err);
  std::longjmp(e->jmp, 1);
}

ImageBuffer read_jpeg(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  POLC_CHECK_T(fp, IoError, "cannot open " + path);
  jpeg_decompress_struct cinfo;
  JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_err_exit;
  if (setjmp(jerr.jmp)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw FormatError("jpeg decode failed: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width);
  const int h = static_cast<int>(cinfo.output_height);
  std::vector<unsigned char> rgb(static_cast<std::size_t>(h) * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return from_rgb8(rgb, h, w);
}

ImageBuffer read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  POLC_CHECK_T(is.good(), IoError, "cannot open " + path);
  std::string magic;
  is >> magic;
  POLC_CHECK_T(magic == "P6", FormatError, "not a P6 ppm: " + path);
  auto skip_ws = [&] {
    while (true) {
      int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
  };
  int w, h, maxv;
  skip_ws();
  is >> w;
  skip_ws();
  is >> h;
  skip_ws();
  is >> maxv;
  is.get();
  POLC_CHECK_T(maxv == 255 && w > 0 && h > 0, FormatError, "unsupported ppm: " + path);
  std::vector<unsigned char> rgb(static_cast<std::size_t>(h) * w * 3);
  is.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  POLC_CHECK_T(is.good(), FormatError, "truncated ppm: " + path);
  return from_rgb8(rgb, h, w);
}

bool ends_with(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

ImageBuffer read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  POLC_CHECK_T(is.good(), IoError, "cannot open " + path);
  unsigned char sig[8] = {};
  is.read(reinterpret_cast<char*>(sig), 8);
  is.close();
  if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') return read_png(path);
  if (sig[0] == 0xFF && sig[1] == 0xD8) return read_jpeg(path);
  if (sig[0] == 'P' && sig[1] == '6') return read_ppm(path);
  throw FormatError("unrecognized image format: " + path);
}

void write_image(const std::string& path, const ImageBuffer& img) {
  auto rgb = to_rgb8(img);
  if (ends_with(path, ".png")) {
    write_png_rgb(path, rgb.data(), img.height(), img.width(), 3);
  } else if (ends_with(path, ".ppm")) {
    std::ofstream os(path, std::ios::binary);
    POLC_CHECK_T(os.good(), IoError, "cannot write " + path);
    os << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  } else {
    throw SpecError("unsupported output image extension: " + path);
  }
}

void write_gray(const std::string& path, const Tensor& hw) {
  POLC_CHECK(hw.ndim() == 2, "write_gray: want (H,W)");
  const int h = hw.dim(0), w = hw.dim(1);
  std::vector<unsigned char> g(static_cast<std::size_t>(h) * w);
  for (std::int64_t i = 0; i < hw.size(); ++i) {
    double v = hw[i];
    v = v < 0 ? 0 : (v > 1 ? 1 : v);
    g[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  if (ends_with(path, ".png")) {
    write_png_rgb(path, g.data(), h, w, 1);
  } else if (ends_with(path, ".pgm")) {
    std::ofstream os(path, std::ios::binary);
    POLC_CHECK_T(os.good(), IoError, "cannot write " + path);
    os << "P5\n" << w << " " << h << "\n255\n";
    os.write(reinterpret_cast<const char*>(g.data()), static_cast<std::streamsize>(g.size()));
  } else {
    throw SpecError("unsupported gray image extension: " + path);
  }
}

}  // namespace polc
