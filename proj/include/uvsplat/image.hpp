#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "uvsplat/common.hpp"

namespace uvsplat {

// Dense row-major, channel-interleaved raster. Maps and images alike.
template <typename T>
struct Image {
  int height = 0, width = 0, channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int h, int w, int c, T fill = T{})
      : height(h), width(w), channels(c), data(size_t(h) * w * c, fill) {}

  size_t index(int r, int c, int ch = 0) const {
    return (size_t(r) * width + c) * channels + ch;
  }
  T& at(int r, int c, int ch = 0) { return data[index(r, c, ch)]; }
  const T& at(int r, int c, int ch = 0) const { return data[index(r, c, ch)]; }

  T* row(int r) { return data.data() + size_t(r) * width * channels; }
  const T* row(int r) const { return data.data() + size_t(r) * width * channels; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

using ImageF = Image<float>;
using ImageD = Image<double>;
using ImageU8 = Image<uint8_t>;
using ImageU16 = Image<uint16_t>;
using ImageI32 = Image<int32_t>;

template <typename Dst, typename Src>
Image<Dst> convert(const Image<Src>& src) {
  Image<Dst> out(src.height, src.width, src.channels);
  for (size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<Dst>(src.data[i]);
  return out;
}

inline void check_same_shape(const ImageD& a, const ImageD& b, const char* what) {
  require(a.same_shape(b), ErrorCode::shape_mismatch, std::string(what) + ": image shapes differ");
}

}  // namespace uvsplat
