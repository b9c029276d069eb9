#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "longview/image.hpp"
#include "longview/rng.hpp"

namespace longview::augment {

inline constexpr std::array<float, 3> kNormalizeMean = {0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kNormalizeStd = {0.229f, 0.224f, 0.225f};

enum class TransformKind {
  random_resized_crop,
  color_jitter,
  random_grayscale,
  gaussian_blur,
  solarize,
  horizontal_flip,
  normalize,
};

struct Transform {
  TransformKind kind;
  float prob = 1.f;

  // random_resized_crop
  int out_size = 224;
  float scale_lo = 0.08f, scale_hi = 1.f;
  float aspect_lo = 3.f / 4.f, aspect_hi = 4.f / 3.f;
  // color_jitter (strengths)
  float brightness = 0.f, contrast = 0.f, saturation = 0.f, hue = 0.f;
  // gaussian_blur (sigma sampled uniformly)
  float sigma_lo = 0.1f, sigma_hi = 2.f;
  // solarize
  float threshold = 0.5f;
  // normalize
  std::array<float, 3> mean = kNormalizeMean;
  std::array<float, 3> stdev = kNormalizeStd;
};

struct AugmentPolicy {
  std::vector<Transform> transforms;

  // Probabilities in [0,1]; normalize, when present, must be last.
  void validate() const;
};

// Deterministic elementary transforms.
Image solarize(const Image& frame, float threshold = 0.5f);
Image gaussian_blur(const Image& frame, float sigma);
Image horizontal_flip(const Image& frame);
Image normalize(const Image& frame, const std::array<float, 3>& mean,
                const std::array<float, 3>& stdev);
Image denormalize(const Image& frame, const std::array<float, 3>& mean,
                  const std::array<float, 3>& stdev);
Image to_grayscale(const Image& frame);
// Factors of exactly 1 (and hue shift 0) are the identity.
Image color_jitter(const Image& frame, float brightness_f, float contrast_f, float saturation_f,
                   float hue_shift);

// Stochastic crop: area fraction in [scale_lo, scale_hi] of the input, aspect
// log-uniform in [aspect_lo, aspect_hi], then bilinear resize to out x out.
Image random_resized_crop(const Image& frame, Rng& rng, int out_size, float scale_lo,
                          float scale_hi, float aspect_lo, float aspect_hi);

// Applies the policy in order. Every stochastic choice is drawn from a
// generator keyed by (seed, transform index), so a fixed seed reproduces the
// output exactly.
Image apply_policy(const Image& frame, const AugmentPolicy& policy, uint64_t seed);

// The stronger-augmentation pipeline used by the episode-classification task.
AugmentPolicy temporal_classification_policy(int out_size = 224, bool with_color_jitter = true,
                                             bool with_normalize = true);

struct MultiCropSpec {
  int n_global = 2;
  int global_size = 224;
  float global_scale_lo = 0.15f, global_scale_hi = 1.f;
  int n_local = 8;
  int local_size = 96;
  float local_scale_lo = 0.05f, local_scale_hi = 0.15f;
  bool with_normalize = true;

  void validate() const;  // n_global >= 2 required by the self-distillation loss
};

// Per-view policy for view index v (0..n_global-1 global, then locals).
// Global view 0 blurs always; global view 1 blurs with p=0.1 and solarizes
// with p=0.2; local views blur with p=0.5.
AugmentPolicy multicrop_view_policy(const MultiCropSpec& spec, int view_index);

// n_global + n_local views, order fixed: globals first, then locals.
std::vector<Image> dino_multicrop(const Image& frame, const MultiCropSpec& spec, uint64_t seed);

}  // namespace longview::augment
