#include "longview/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace longview {

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (src.height < 1 || src.width < 1)
    throw std::invalid_argument("resize_bilinear: empty source image");
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("resize_bilinear: output dims must be >= 1");
  if (out_h == src.height && out_w == src.width) return src;

  Image dst(out_h, out_w);
  const float sy = static_cast<float>(src.height) / out_h;
  const float sx = static_cast<float>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    float fy = (y + 0.5f) * sy - 0.5f;
    int y0 = static_cast<int>(std::floor(fy));
    float wy = fy - y0;
    int y0c = std::clamp(y0, 0, src.height - 1);
    int y1c = std::clamp(y0 + 1, 0, src.height - 1);
    for (int x = 0; x < out_w; ++x) {
      float fx = (x + 0.5f) * sx - 0.5f;
      int x0 = static_cast<int>(std::floor(fx));
      float wx = fx - x0;
      int x0c = std::clamp(x0, 0, src.width - 1);
      int x1c = std::clamp(x0 + 1, 0, src.width - 1);
      for (int c = 0; c < 3; ++c) {
        float v00 = src.at(y0c, x0c, c);
        float v01 = src.at(y0c, x1c, c);
        float v10 = src.at(y1c, x0c, c);
        float v11 = src.at(y1c, x1c, c);
        float top = v00 + (v01 - v00) * wx;
        float bot = v10 + (v11 - v10) * wx;
        dst.at(y, x, c) = top + (bot - top) * wy;
      }
    }
  }
  return dst;
}

Image crop(const Image& src, int top, int left, int h, int w) {
  if (top < 0 || left < 0 || top + h > src.height || left + w > src.width)
    throw std::invalid_argument("crop: window out of bounds");
  Image dst(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) dst.at(y, x, c) = src.at(top + y, left + x, c);
  return dst;
}

float luminance(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

double mean_pixel(const Image& img) {
  double s = 0.0;
  for (float v : img.data) s += v;
  return img.data.empty() ? 0.0 : s / static_cast<double>(img.data.size());
}

void clamp01(Image& img) {
  for (float& v : img.data) v = std::clamp(v, 0.f, 1.f);
}

bool all_finite(const Image& img) {
  for (float v : img.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace longview
