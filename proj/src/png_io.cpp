#include "uvsplat/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace uvsplat {

namespace {

constexpr uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& payload) {
  put_u32(out, uint32_t(payload.size()));
  const size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc =
      uint32_t(crc32(0L, out.data() + start, uInt(out.size() - start)));
  put_u32(out, crc);
}

int color_type_for(int channels) {
  switch (channels) {
    case 1: return 0;
    case 2: return 4;
    case 3: return 2;
    case 4: return 6;
    default: fail(ErrorCode::invalid_config, "png channels must be 1..4");
  }
}

int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 4: return 2;
    case 6: return 4;
    default: fail(ErrorCode::parse_error, "unsupported png color type (palette?)");
  }
}

uint8_t paeth(uint8_t a, uint8_t b, uint8_t c) {
  const int p = int(a) + int(b) - int(c);
  const int pa = std::abs(p - int(a)), pb = std::abs(p - int(b)), pc = std::abs(p - int(c));
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

void write_png_raw(const std::string& path, const uint16_t* samples, int H, int W, int channels,
                   int bit_depth) {
  require(bit_depth == 8 || bit_depth == 16, ErrorCode::invalid_config,
          "png bit depth must be 8 or 16");
  const int bytes_per_sample = bit_depth / 8;
  const size_t stride = size_t(W) * channels * bytes_per_sample;

  // filter 0 on every scanline: deterministic output, zlib does the rest
  std::vector<uint8_t> raw((stride + 1) * size_t(H));
  for (int r = 0; r < H; ++r) {
    uint8_t* dst = raw.data() + size_t(r) * (stride + 1);
    *dst++ = 0;
    const uint16_t* src = samples + size_t(r) * W * channels;
    if (bit_depth == 8) {
      for (size_t i = 0; i < size_t(W) * channels; ++i) dst[i] = uint8_t(src[i]);
    } else {
      for (size_t i = 0; i < size_t(W) * channels; ++i) {
        dst[2 * i] = uint8_t(src[i] >> 8);  // big-endian samples
        dst[2 * i + 1] = uint8_t(src[i]);
      }
    }
  }

  uLongf comp_bound = compressBound(uLong(raw.size()));
  std::vector<uint8_t> compressed(comp_bound);
  require(compress2(compressed.data(), &comp_bound, raw.data(), uLong(raw.size()), 6) == Z_OK,
          ErrorCode::io_error, "zlib compression failed");
  compressed.resize(comp_bound);

  std::vector<uint8_t> file(kSignature, kSignature + 8);
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, uint32_t(W));
  put_u32(ihdr, uint32_t(H));
  ihdr.push_back(uint8_t(bit_depth));
  ihdr.push_back(uint8_t(color_type_for(channels)));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT", compressed);
  append_chunk(file, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io_error, "cannot write png: " + path);
  out.write(reinterpret_cast<const char*>(file.data()), std::streamsize(file.size()));
  require(out.good(), ErrorCode::io_error, "short png write: " + path);
}

}  // namespace

PngImage read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  require(in.good(), ErrorCode::missing_input, "cannot open png: " + path);
  const auto size = size_t(in.tellg());
  in.seekg(0);
  std::vector<uint8_t> file(size);
  in.read(reinterpret_cast<char*>(file.data()), std::streamsize(size));
  require(in.good() && size > 8 + 25, ErrorCode::parse_error, "truncated png: " + path);
  require(std::memcmp(file.data(), kSignature, 8) == 0, ErrorCode::parse_error,
          "not a png file: " + path);

  int W = 0, H = 0, bit_depth = 0, color_type = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool seen_ihdr = false, seen_iend = false;
  while (pos + 12 <= size && !seen_iend) {
    const uint32_t len = get_u32(&file[pos]);
    require(pos + 12 + len <= size, ErrorCode::parse_error, "corrupt png chunk in " + path);
    const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
    const uint8_t* payload = &file[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, ErrorCode::parse_error, "bad IHDR in " + path);
      W = int(get_u32(payload));
      H = int(get_u32(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      require(payload[12] == 0, ErrorCode::parse_error, "interlaced png not supported: " + path);
      require(bit_depth == 8 || bit_depth == 16, ErrorCode::parse_error,
              "png bit depth must be 8 or 16: " + path);
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    pos += 12 + len;
  }
  require(seen_ihdr && !idat.empty() && W > 0 && H > 0, ErrorCode::parse_error,
          "png missing IHDR/IDAT: " + path);

  const int channels = channels_for(color_type);
  const int bps = bit_depth / 8;
  const size_t stride = size_t(W) * channels * bps;
  std::vector<uint8_t> raw((stride + 1) * size_t(H));
  uLongf raw_len = uLongf(raw.size());
  require(uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) == Z_OK &&
              raw_len == raw.size(),
          ErrorCode::parse_error, "png inflate failed: " + path);

  // undo scanline filters in place
  const int bpp = channels * bps;  // filter unit
  std::vector<uint8_t> prev(stride, 0);
  PngImage out;
  out.bit_depth = bit_depth;
  out.samples = ImageU16(H, W, channels);
  for (int r = 0; r < H; ++r) {
    uint8_t* line = raw.data() + size_t(r) * (stride + 1);
    const uint8_t filter = line[0];
    uint8_t* cur = line + 1;
    switch (filter) {
      case 0: break;
      case 1:
        for (size_t i = bpp; i < stride; ++i) cur[i] = uint8_t(cur[i] + cur[i - bpp]);
        break;
      case 2:
        for (size_t i = 0; i < stride; ++i) cur[i] = uint8_t(cur[i] + prev[i]);
        break;
      case 3:
        for (size_t i = 0; i < stride; ++i)
          cur[i] = uint8_t(cur[i] + ((i >= size_t(bpp) ? cur[i - bpp] : 0) + prev[i]) / 2);
        break;
      case 4:
        for (size_t i = 0; i < stride; ++i)
          cur[i] = uint8_t(cur[i] + paeth(i >= size_t(bpp) ? cur[i - bpp] : 0, prev[i],
                                          i >= size_t(bpp) ? prev[i - bpp] : 0));
        break;
      default:
        fail(ErrorCode::parse_error, "bad png filter byte in " + path);
    }
    std::memcpy(prev.data(), cur, stride);
    uint16_t* dst = out.samples.row(r);
    if (bit_depth == 8) {
      for (size_t i = 0; i < size_t(W) * channels; ++i) dst[i] = cur[i];
    } else {
      for (size_t i = 0; i < size_t(W) * channels; ++i)
        dst[i] = uint16_t((uint16_t(cur[2 * i]) << 8) | cur[2 * i + 1]);
    }
  }
  return out;
}

ImageF read_png_float(const std::string& path) {
  const PngImage png = read_png(path);
  const float scale = png.bit_depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
  ImageF out(png.samples.height, png.samples.width, png.samples.channels);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = float(png.samples.data[i]) * scale;
  return out;
}

void write_png(const std::string& path, const ImageF& image, int bit_depth) {
  const int maxval = bit_depth == 8 ? 255 : 65535;
  ImageU16 q(image.height, image.width, image.channels);
  for (size_t i = 0; i < image.data.size(); ++i) {
    const float v = std::clamp(image.data[i], 0.0f, 1.0f);
    q.data[i] = uint16_t(std::lround(double(v) * maxval));
  }
  write_png_raw(path, q.data.data(), q.height, q.width, q.channels, bit_depth);
}

void write_png(const std::string& path, const ImageU8& image) {
  ImageU16 wide = convert<uint16_t>(image);
  write_png_raw(path, wide.data.data(), wide.height, wide.width, wide.channels, 8);
}

void write_png(const std::string& path, const ImageU16& image) {
  write_png_raw(path, image.data.data(), image.height, image.width, image.channels, 16);
}

ImageF read_mask_png(const std::string& path) {
  const PngImage png = read_png(path);
  const float half = png.bit_depth == 8 ? 127.5f : 32767.5f;
  ImageF out(png.samples.height, png.samples.width, 1);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c)
      out.at(r, c) = png.samples.at(r, c, 0) > half ? 1.0f : 0.0f;
  return out;
}

}  // namespace uvsplat
