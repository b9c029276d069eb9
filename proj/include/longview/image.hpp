#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace longview {

// Interleaved HWC float image, 3 channels, values nominally in [0,1]
// (normalization may move them outside that range).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // height * width * 3

  Image() = default;
  Image(int h, int w, float fill = 0.f)
      : height(h), width(w), data(static_cast<size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  size_t size() const { return data.size(); }
};

// Bilinear resample to (out_h, out_w) with half-pixel centers.
Image resize_bilinear(const Image& src, int out_h, int out_w);

Image crop(const Image& src, int top, int left, int h, int w);

// Rec.601 luma.
float luminance(float r, float g, float b);

double mean_pixel(const Image& img);

void clamp01(Image& img);

bool all_finite(const Image& img);

// 8-bit RGB PNG via zlib. Throws on I/O failure.
void write_png(const std::string& path, const Image& img);

}  // namespace longview
