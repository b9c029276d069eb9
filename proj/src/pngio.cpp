#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "longview/image.hpp"

namespace longview {

namespace {

void put_u32_be(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

void write_chunk(std::vector<unsigned char>& out, const char type[4],
                 const unsigned char* payload, uint32_t len) {
  put_u32_be(out, len);
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  if (len) out.insert(out.end(), payload, payload + len);
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + len)));
  put_u32_be(out, crc);
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  const int h = img.height, w = img.width;
  if (h < 1 || w < 1) throw std::invalid_argument("write_png: empty image");

  // Filter 0 on every scanline.
  std::vector<unsigned char> raw(static_cast<size_t>(h) * (1 + 3 * w));
  size_t p = 0;
  for (int y = 0; y < h; ++y) {
    raw[p++] = 0;
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = std::clamp(img.at(y, x, c), 0.f, 1.f);
        raw[p++] = static_cast<unsigned char>(std::lround(v * 255.f));
      }
  }

  uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> comp(comp_cap);
  if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("write_png: zlib compression failed");
  comp.resize(comp_cap);

  std::vector<unsigned char> out;
  static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  out.insert(out.end(), sig, sig + 8);

  unsigned char ihdr[13];
  ihdr[0] = static_cast<unsigned char>(w >> 24);
  ihdr[1] = static_cast<unsigned char>(w >> 16);
  ihdr[2] = static_cast<unsigned char>(w >> 8);
  ihdr[3] = static_cast<unsigned char>(w);
  ihdr[4] = static_cast<unsigned char>(h >> 24);
  ihdr[5] = static_cast<unsigned char>(h >> 16);
  ihdr[6] = static_cast<unsigned char>(h >> 8);
  ihdr[7] = static_cast<unsigned char>(h);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type RGB
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter
  ihdr[12] = 0;  // interlace
  write_chunk(out, "IHDR", ihdr, 13);
  write_chunk(out, "IDAT", comp.data(), static_cast<uint32_t>(comp.size()));
  write_chunk(out, "IEND", nullptr, 0);

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_png: cannot open " + path);
  size_t written = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (written != out.size()) throw std::runtime_error("write_png: short write to " + path);
}

}  // namespace longview
