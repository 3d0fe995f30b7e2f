#pragma once

#include <string>

#include "uvsplat/image.hpp"

namespace uvsplat {

// Minimal PNG support: bit depths 8/16, gray / gray+alpha / RGB / RGBA,
// no interlacing, no palettes. Values scale to [0,1] on read.

struct PngImage {
  ImageU16 samples;   // native-range samples
  int bit_depth = 8;  // 8 or 16
};

PngImage read_png(const std::string& path);

// [0,1] floats; 8-bit unless bit_depth 16 is requested
ImageF read_png_float(const std::string& path);
void write_png(const std::string& path, const ImageF& image, int bit_depth = 8);
void write_png(const std::string& path, const ImageU8& image);
void write_png(const std::string& path, const ImageU16& image);

// single-channel mask thresholded at 0.5 (first channel when multi-channel)
ImageF read_mask_png(const std::string& path);

}  // namespace uvsplat
