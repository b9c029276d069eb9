#include "longview/augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace longview::augment {

namespace {

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  float mx = std::max({r, g, b});
  float mn = std::min({r, g, b});
  float d = mx - mn;
  v = mx;
  s = mx > 0.f ? d / mx : 0.f;
  if (d <= 0.f) {
    h = 0.f;
    return;
  }
  if (mx == r)
    h = (g - b) / d + (g < b ? 6.f : 0.f);
  else if (mx == g)
    h = (b - r) / d + 2.f;
  else
    h = (r - g) / d + 4.f;
  h /= 6.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  h = h - std::floor(h);
  int i = static_cast<int>(h * 6.f) % 6;
  float f = h * 6.f - std::floor(h * 6.f);
  float p = v * (1.f - s);
  float q = v * (1.f - f * s);
  float t = v * (1.f - (1.f - f) * s);
  switch (i) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace

void AugmentPolicy::validate() const {
  for (size_t i = 0; i < transforms.size(); ++i) {
    const Transform& t = transforms[i];
    if (t.prob < 0.f || t.prob > 1.f)
      throw std::invalid_argument("AugmentPolicy: probability out of [0,1] at transform " +
                                  std::to_string(i));
    if (t.kind == TransformKind::normalize && i + 1 != transforms.size())
      throw std::invalid_argument("AugmentPolicy: normalize must be the last transform");
  }
}

Image solarize(const Image& frame, float threshold) {
  Image out = frame;
  for (float& v : out.data)
    if (v >= threshold) v = 1.f - v;
  return out;
}

Image gaussian_blur(const Image& frame, float sigma) {
  if (!(sigma > 0.f)) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
  int radius = std::max(1, static_cast<int>(std::lround(3.0 * sigma)));
  std::vector<float> kernel(static_cast<size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double w = std::exp(-0.5 * (static_cast<double>(i) * i) / (static_cast<double>(sigma) * sigma));
    kernel[static_cast<size_t>(i + radius)] = static_cast<float>(w);
    ksum += w;
  }
  for (float& w : kernel) w = static_cast<float>(w / ksum);

  const int h = frame.height, w = frame.width;
  Image tmp(h, w), out(h, w);
  // Horizontal pass, reflect padding.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0.f;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<size_t>(k + radius)] * frame.at(y, reflect_index(x + k, w), c);
        tmp.at(y, x, c) = acc;
      }
  // Vertical pass.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0.f;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[static_cast<size_t>(k + radius)] * tmp.at(reflect_index(y + k, h), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

Image horizontal_flip(const Image& frame) {
  Image out(frame.height, frame.width);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = frame.at(y, frame.width - 1 - x, c);
  return out;
}

Image normalize(const Image& frame, const std::array<float, 3>& mean,
                const std::array<float, 3>& stdev) {
  Image out = frame;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = (out.at(y, x, c) - mean[c]) / stdev[c];
  return out;
}

Image denormalize(const Image& frame, const std::array<float, 3>& mean,
                  const std::array<float, 3>& stdev) {
  Image out = frame;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = out.at(y, x, c) * stdev[c] + mean[c];
  return out;
}

Image to_grayscale(const Image& frame) {
  Image out(frame.height, frame.width);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      float g = luminance(frame.at(y, x, 0), frame.at(y, x, 1), frame.at(y, x, 2));
      out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = g;
    }
  return out;
}

Image color_jitter(const Image& frame, float brightness_f, float contrast_f, float saturation_f,
                   float hue_shift) {
  Image out = frame;
  if (brightness_f != 1.f) {
    for (float& v : out.data) v = std::clamp(v * brightness_f, 0.f, 1.f);
  }
  if (contrast_f != 1.f) {
    // Blend with the mean luminance of the grayscale image.
    double lum = 0.0;
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        lum += luminance(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
    float m = static_cast<float>(lum / (static_cast<double>(out.height) * out.width));
    for (float& v : out.data) v = std::clamp(m + contrast_f * (v - m), 0.f, 1.f);
  }
  if (saturation_f != 1.f) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        float g = luminance(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
        for (int c = 0; c < 3; ++c)
          out.at(y, x, c) = std::clamp(g + saturation_f * (out.at(y, x, c) - g), 0.f, 1.f);
      }
  }
  if (hue_shift != 0.f) {
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        float h, s, v;
        rgb_to_hsv(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2), h, s, v);
        float r, g, b;
        hsv_to_rgb(h + hue_shift, s, v, r, g, b);
        out.at(y, x, 0) = std::clamp(r, 0.f, 1.f);
        out.at(y, x, 1) = std::clamp(g, 0.f, 1.f);
        out.at(y, x, 2) = std::clamp(b, 0.f, 1.f);
      }
  }
  return out;
}

Image random_resized_crop(const Image& frame, Rng& rng, int out_size, float scale_lo,
                          float scale_hi, float aspect_lo, float aspect_hi) {
  if (out_size < 1) throw std::invalid_argument("random_resized_crop: out_size must be >= 1");
  const int h = frame.height, w = frame.width;
  const double area = static_cast<double>(h) * w;
  for (int attempt = 0; attempt < 10; ++attempt) {
    double target_area = area * rng.uniform(scale_lo, scale_hi);
    double log_ratio = rng.uniform(std::log(static_cast<double>(aspect_lo)),
                                   std::log(static_cast<double>(aspect_hi)));
    double aspect = std::exp(log_ratio);
    int cw = static_cast<int>(std::lround(std::sqrt(target_area * aspect)));
    int ch = static_cast<int>(std::lround(std::sqrt(target_area / aspect)));
    if (cw < 1 || ch < 1 || cw > w || ch > h) continue;
    int top = rng.uniform_int(h - ch + 1);
    int left = rng.uniform_int(w - cw + 1);
    return resize_bilinear(crop(frame, top, left, ch, cw), out_size, out_size);
  }
  // Fallback: central square of the minor edge.
  int side = std::min(h, w);
  return resize_bilinear(crop(frame, (h - side) / 2, (w - side) / 2, side, side), out_size, out_size);
}

Image apply_policy(const Image& frame, const AugmentPolicy& policy, uint64_t seed) {
  policy.validate();
  Image img = frame;
  for (size_t i = 0; i < policy.transforms.size(); ++i) {
    const Transform& t = policy.transforms[i];
    Rng rng(hash_mix(seed, 0xA06ULL, static_cast<uint64_t>(i)));
    if (t.prob < 1.f && rng.uniform() >= t.prob) continue;
    switch (t.kind) {
      case TransformKind::random_resized_crop:
        img = random_resized_crop(img, rng, t.out_size, t.scale_lo, t.scale_hi, t.aspect_lo,
                                  t.aspect_hi);
        break;
      case TransformKind::color_jitter: {
        float fb = t.brightness > 0.f
                       ? static_cast<float>(rng.uniform(std::max(0.f, 1.f - t.brightness), 1.f + t.brightness))
                       : 1.f;
        float fc = t.contrast > 0.f
                       ? static_cast<float>(rng.uniform(std::max(0.f, 1.f - t.contrast), 1.f + t.contrast))
                       : 1.f;
        float fs = t.saturation > 0.f
                       ? static_cast<float>(rng.uniform(std::max(0.f, 1.f - t.saturation), 1.f + t.saturation))
                       : 1.f;
        float fh = t.hue > 0.f ? static_cast<float>(rng.uniform(-t.hue * 0.5, t.hue * 0.5)) : 0.f;
        // The four adjustments are applied in a random order.
        int order[4] = {0, 1, 2, 3};
        for (int k = 3; k > 0; --k) std::swap(order[k], order[rng.uniform_int(k + 1)]);
        for (int idx : order) {
          switch (idx) {
            case 0: img = color_jitter(img, fb, 1.f, 1.f, 0.f); break;
            case 1: img = color_jitter(img, 1.f, fc, 1.f, 0.f); break;
            case 2: img = color_jitter(img, 1.f, 1.f, fs, 0.f); break;
            case 3: img = color_jitter(img, 1.f, 1.f, 1.f, fh); break;
          }
        }
        break;
      }
      case TransformKind::random_grayscale:
        img = to_grayscale(img);
        break;
      case TransformKind::gaussian_blur:
        img = gaussian_blur(img, static_cast<float>(rng.uniform(t.sigma_lo, t.sigma_hi)));
        break;
      case TransformKind::solarize:
        img = solarize(img, t.threshold);
        break;
      case TransformKind::horizontal_flip:
        img = horizontal_flip(img);
        break;
      case TransformKind::normalize:
        img = normalize(img, t.mean, t.stdev);
        break;
    }
  }
  return img;
}

AugmentPolicy temporal_classification_policy(int out_size, bool with_color_jitter,
                                             bool with_normalize) {
  AugmentPolicy p;
  Transform rrc{TransformKind::random_resized_crop};
  rrc.out_size = out_size;
  rrc.scale_lo = 0.08f;
  rrc.scale_hi = 1.f;
  p.transforms.push_back(rrc);
  if (with_color_jitter) {
    Transform jitter{TransformKind::color_jitter};
    jitter.prob = 0.9f;
    jitter.brightness = jitter.contrast = jitter.saturation = 0.9f;
    jitter.hue = 0.5f;
    p.transforms.push_back(jitter);
  }
  Transform gray{TransformKind::random_grayscale};
  gray.prob = 0.2f;
  p.transforms.push_back(gray);
  Transform blur{TransformKind::gaussian_blur};
  blur.prob = 0.5f;
  blur.sigma_lo = 0.1f;
  blur.sigma_hi = 2.f;
  p.transforms.push_back(blur);
  Transform flip{TransformKind::horizontal_flip};
  flip.prob = 0.5f;
  p.transforms.push_back(flip);
  if (with_normalize) p.transforms.push_back(Transform{TransformKind::normalize});
  return p;
}

void MultiCropSpec::validate() const {
  if (n_global < 2)
    throw std::invalid_argument("MultiCropSpec: n_global must be >= 2 for the distillation loss");
  if (n_local < 0) throw std::invalid_argument("MultiCropSpec: n_local must be >= 0");
  if (global_size < 1 || local_size < 1)
    throw std::invalid_argument("MultiCropSpec: view sizes must be >= 1");
}

AugmentPolicy multicrop_view_policy(const MultiCropSpec& spec, int view_index) {
  bool global = view_index < spec.n_global;
  AugmentPolicy p;
  Transform rrc{TransformKind::random_resized_crop};
  rrc.out_size = global ? spec.global_size : spec.local_size;
  rrc.scale_lo = global ? spec.global_scale_lo : spec.local_scale_lo;
  rrc.scale_hi = global ? spec.global_scale_hi : spec.local_scale_hi;
  p.transforms.push_back(rrc);

  Transform flip{TransformKind::horizontal_flip};
  flip.prob = 0.5f;
  p.transforms.push_back(flip);
  Transform jitter{TransformKind::color_jitter};
  jitter.prob = 0.9f;
  jitter.brightness = jitter.contrast = jitter.saturation = 0.9f;
  jitter.hue = 0.5f;
  p.transforms.push_back(jitter);
  Transform gray{TransformKind::random_grayscale};
  gray.prob = 0.2f;
  p.transforms.push_back(gray);

  Transform blur{TransformKind::gaussian_blur};
  blur.prob = global ? (view_index == 0 ? 1.f : 0.1f) : 0.5f;
  p.transforms.push_back(blur);
  if (global && view_index == 1) {
    Transform sol{TransformKind::solarize};
    sol.prob = 0.2f;
    p.transforms.push_back(sol);
  }
  if (spec.with_normalize) p.transforms.push_back(Transform{TransformKind::normalize});
  return p;
}

std::vector<Image> dino_multicrop(const Image& frame, const MultiCropSpec& spec, uint64_t seed) {
  spec.validate();
  std::vector<Image> views;
  views.reserve(static_cast<size_t>(spec.n_global + spec.n_local));
  for (int v = 0; v < spec.n_global + spec.n_local; ++v)
    views.push_back(apply_policy(frame, multicrop_view_policy(spec, v),
                                 hash_mix(seed, 0xD1C0ULL, static_cast<uint64_t>(v))));
  return views;
}

}  // namespace longview::augment
