#pragma once

#include <string>

#include "polc/image.hpp"

namespace polc {

// Reads PNG / JPEG / PPM(P6) by sniffing the file signature; 8-bit values map
// to [0,1] by /255. Grayscale and alpha inputs are expanded/dropped to RGB.
ImageBuffer read_image(const std::string& path);

// Writers pick the format from the extension: .png, .ppm. Values are clamped
// to [0,1] and rounded to 8 bits.
void write_image(const std::string& path, const ImageBuffer& img);

// Grayscale heatmap writer (.png / .pgm), data already scaled to [0,1].
void write_gray(const std::string& path, const Tensor& hw);

}  // namespace polc
