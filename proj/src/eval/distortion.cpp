#include "longview/eval/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "longview/augment/augment.hpp"

namespace longview::eval {

namespace {

constexpr double kPi = 3.141592653589793;

using Cplx = std::complex<double>;

// Naive O(N^2) transforms; frames are small. Row-column decomposition.
void dft_1d(const Cplx* in, Cplx* out, int n, int stride, bool inverse) {
  double sign = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    Cplx acc(0.0, 0.0);
    for (int j = 0; j < n; ++j) {
      double ang = sign * 2.0 * kPi * static_cast<double>(k) * j / n;
      acc += in[j * stride] * Cplx(std::cos(ang), std::sin(ang));
    }
    out[k * stride] = acc;
  }
}

void dft_2d(std::vector<Cplx>& a, int h, int w, bool inverse) {
  std::vector<Cplx> line(static_cast<size_t>(std::max(h, w)));
  for (int y = 0; y < h; ++y) {
    dft_1d(a.data() + static_cast<size_t>(y) * w, line.data(), w, 1, inverse);
    std::copy(line.begin(), line.begin() + w, a.begin() + static_cast<size_t>(y) * w);
  }
  std::vector<Cplx> col(static_cast<size_t>(h));
  for (int x = 0; x < w; ++x) {
    dft_1d(a.data() + x, col.data(), h, w, inverse);
    for (int y = 0; y < h; ++y) a[static_cast<size_t>(y) * w + x] = col[static_cast<size_t>(y)];
  }
  if (inverse) {
    double inv = 1.0 / (static_cast<double>(h) * w);
    for (auto& v : a) v *= inv;
  }
}

std::vector<Cplx> channel_dft(const Image& frame, int c) {
  std::vector<Cplx> a(static_cast<size_t>(frame.height) * frame.width);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      a[static_cast<size_t>(y) * frame.width + x] = Cplx(frame.at(y, x, c), 0.0);
  dft_2d(a, frame.height, frame.width, /*inverse=*/false);
  return a;
}

// Antisymmetric field delta(u,v) = -delta(-u,-v) so exp(i*delta) keeps the
// spectrum conjugate-symmetric and the image real.
std::vector<double> antisymmetric_phase_field(int h, int w, Rng& rng) {
  std::vector<double> field(static_cast<size_t>(h) * w, 0.0);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      int cu = (h - u) % h, cv = (w - v) % w;
      if (u == cu && v == cv) continue;  // self-conjugate bin stays 0
      bool primary = (u < cu) || (u == cu && v < cv);
      if (!primary) continue;
      double d = rng.uniform(-kPi, kPi);
      field[static_cast<size_t>(u) * w + v] = d;
      field[static_cast<size_t>(cu) * w + cv] = -d;
    }
  return field;
}

Image rot90(const Image& src) {
  Image out(src.width, src.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(x, src.width - 1 - y, c);
  return out;
}

}  // namespace

const char* distortion_name(DistortionKind k) {
  switch (k) {
    case DistortionKind::contrast: return "contrast";
    case DistortionKind::uniform_noise: return "uniform_noise";
    case DistortionKind::low_pass: return "low_pass";
    case DistortionKind::high_pass: return "high_pass";
    case DistortionKind::phase_scrambling: return "phase_scrambling";
    case DistortionKind::power_equalization: return "power_equalization";
    case DistortionKind::false_color: return "false_color";
    case DistortionKind::rotation: return "rotation";
    case DistortionKind::grayscale: return "grayscale";
  }
  return "?";
}

void DistortionSpec::validate() const {
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument(std::string(distortion_name(kind)) + ": " + msg + " (got " +
                                std::to_string(parameter) + ")");
  };
  switch (kind) {
    case DistortionKind::contrast:
      if (!(parameter > 0.0) || parameter > 1.0) fail("contrast factor must be in (0,1]");
      break;
    case DistortionKind::uniform_noise:
      if (parameter < 0.0) fail("noise width must be >= 0");
      break;
    case DistortionKind::low_pass:
      if (parameter < 0.0) fail("sigma must be >= 0");
      break;
    case DistortionKind::high_pass:
      if (!(parameter > 0.0)) fail("sigma must be > 0");
      break;
    case DistortionKind::phase_scrambling:
      if (parameter < 0.0 || parameter > 1.0) fail("scrambling weight must be in [0,1]");
      break;
    case DistortionKind::rotation: {
      int a = static_cast<int>(parameter);
      if (static_cast<double>(a) != parameter || (a != 0 && a != 90 && a != 180 && a != 270))
        fail("rotation must be one of {0,90,180,270}");
      break;
    }
    case DistortionKind::power_equalization:
    case DistortionKind::false_color:
    case DistortionKind::grayscale:
      break;
  }
}

std::optional<double> identity_parameter(DistortionKind k) {
  switch (k) {
    case DistortionKind::contrast: return 1.0;
    case DistortionKind::uniform_noise: return 0.0;
    case DistortionKind::low_pass: return 0.0;  // sigma -> 0 treated as a no-op
    case DistortionKind::rotation: return 0.0;
    case DistortionKind::phase_scrambling: return 0.0;
    default: return std::nullopt;
  }
}

MeanAmplitudeSpectrum mean_amplitude_spectrum(const std::vector<Image>& frames) {
  if (frames.empty()) throw std::invalid_argument("mean_amplitude_spectrum: no frames");
  const int h = frames[0].height, w = frames[0].width;
  MeanAmplitudeSpectrum spec;
  spec.height = h;
  spec.width = w;
  spec.amp.assign(static_cast<size_t>(3) * h * w, 0.0);
  for (const auto& f : frames) {
    if (f.height != h || f.width != w)
      throw std::invalid_argument("mean_amplitude_spectrum: mixed frame sizes");
    for (int c = 0; c < 3; ++c) {
      auto a = channel_dft(f, c);
      for (size_t i = 0; i < a.size(); ++i)
        spec.amp[static_cast<size_t>(c) * h * w + i] += std::abs(a[i]);
    }
  }
  for (double& v : spec.amp) v /= static_cast<double>(frames.size());
  return spec;
}

std::vector<double> channel_amplitude_spectrum(const Image& frame, int channel) {
  auto a = channel_dft(frame, channel);
  std::vector<double> amp(a.size());
  for (size_t i = 0; i < a.size(); ++i) amp[i] = std::abs(a[i]);
  return amp;
}

Image apply_distortion(const Image& frame, const DistortionSpec& spec, uint64_t seed,
                       const MeanAmplitudeSpectrum* mean_amp) {
  spec.validate();
  switch (spec.kind) {
    case DistortionKind::contrast: {
      Image out = frame;
      float c = static_cast<float>(spec.parameter);
      for (float& v : out.data) v = std::clamp(c * (v - 0.5f) + 0.5f, 0.f, 1.f);
      return out;
    }
    case DistortionKind::uniform_noise: {
      if (spec.parameter == 0.0) return frame;
      Image out = frame;
      Rng rng(hash_mix(seed, 0x401CEULL));
      float w = static_cast<float>(spec.parameter);
      for (float& v : out.data) v = std::clamp(v + static_cast<float>(rng.uniform(-w, w)), 0.f, 1.f);
      return out;
    }
    case DistortionKind::low_pass: {
      if (spec.parameter == 0.0) return frame;
      return augment::gaussian_blur(frame, static_cast<float>(spec.parameter));
    }
    case DistortionKind::high_pass: {
      Image blurred = augment::gaussian_blur(frame, static_cast<float>(spec.parameter));
      Image out = frame;
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::clamp(out.data[i] - blurred.data[i] + 0.5f, 0.f, 1.f);
      return out;
    }
    case DistortionKind::phase_scrambling: {
      if (spec.parameter == 0.0) return frame;
      const int h = frame.height, w = frame.width;
      Rng rng(hash_mix(seed, 0x5C3AULL));
      auto field = antisymmetric_phase_field(h, w, rng);
      // Not clamped: clamping would break the amplitude-preservation contract.
      Image out(h, w);
      for (int c = 0; c < 3; ++c) {
        auto a = channel_dft(frame, c);
        for (size_t i = 0; i < a.size(); ++i) {
          double ang = spec.parameter * field[i];
          a[i] *= Cplx(std::cos(ang), std::sin(ang));
        }
        dft_2d(a, h, w, /*inverse=*/true);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            out.at(y, x, c) = static_cast<float>(a[static_cast<size_t>(y) * w + x].real());
      }
      return out;
    }
    case DistortionKind::power_equalization: {
      if (!mean_amp)
        throw std::invalid_argument("power_equalization requires a dataset mean amplitude spectrum");
      if (mean_amp->height != frame.height || mean_amp->width != frame.width)
        throw std::invalid_argument("power_equalization: spectrum size mismatch");
      const int h = frame.height, w = frame.width;
      // Not clamped, so a second application sees identical phases.
      Image out(h, w);
      for (int c = 0; c < 3; ++c) {
        auto a = channel_dft(frame, c);
        for (size_t i = 0; i < a.size(); ++i) {
          double mag = std::abs(a[i]);
          double target = mean_amp->amp[static_cast<size_t>(c) * h * w + i];
          a[i] = mag > 0 ? a[i] * (target / mag) : Cplx(target, 0.0);
        }
        dft_2d(a, h, w, /*inverse=*/true);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            out.at(y, x, c) = static_cast<float>(a[static_cast<size_t>(y) * w + x].real());
      }
      return out;
    }
    case DistortionKind::false_color: {
      Image out = frame;
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
          float lum = luminance(out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
          for (int c = 0; c < 3; ++c)
            out.at(y, x, c) = std::clamp(2.f * lum - out.at(y, x, c), 0.f, 1.f);
        }
      return out;
    }
    case DistortionKind::rotation: {
      int quarter_turns = (static_cast<int>(spec.parameter) / 90) % 4;
      Image out = frame;
      for (int i = 0; i < quarter_turns; ++i) out = rot90(out);
      return out;
    }
    case DistortionKind::grayscale:
      return augment::to_grayscale(frame);
  }
  throw std::invalid_argument("apply_distortion: unknown kind");
}

const std::vector<std::string> kBasicCategories = {
    "airplane", "bear", "bicycle", "bird", "boat", "bottle", "car", "cat",
    "chair", "clock", "dog", "elephant", "keyboard", "knife", "oven", "truck"};

OodSuite OodSuite::default_suite() {
  OodSuite s;
  s.entries = {
      {DistortionKind::contrast, {0.5, 0.3, 0.1, 0.05}},
      {DistortionKind::uniform_noise, {0.03, 0.1, 0.2, 0.35}},
      {DistortionKind::low_pass, {1.0, 3.0, 5.0, 7.0}},
      {DistortionKind::high_pass, {3.0, 1.5, 0.7, 0.45}},
      {DistortionKind::phase_scrambling, {0.3, 0.6, 0.9, 1.0}},
      {DistortionKind::power_equalization, {0.0}},
      {DistortionKind::false_color, {0.0}},
      {DistortionKind::rotation, {90.0, 180.0, 270.0}},
      {DistortionKind::grayscale, {0.0}},
  };
  return s;
}

void OodSuite::validate() const {
  if (entries.empty()) throw std::invalid_argument("OodSuite: empty suite");
  for (const auto& e : entries) {
    if (e.levels.empty())
      throw std::invalid_argument(std::string("OodSuite: entry '") + distortion_name(e.kind) +
                                  "' has no parameter levels");
    for (double level : e.levels) DistortionSpec{e.kind, level}.validate();
  }
  if (practice_size < 1) throw std::invalid_argument("OodSuite: practice_size must be >= 1");
}

OodResult ood_eval(const train::TemporalClassModel& model, int input_size, const OodSuite& suite,
                   const LabeledSet& test, uint64_t seed) {
  suite.validate();
  if (test.items.empty()) throw std::invalid_argument("ood_eval: empty test set");

  bool needs_spectrum = std::any_of(suite.entries.begin(), suite.entries.end(), [](const SuiteEntry& e) {
    return e.kind == DistortionKind::power_equalization;
  });
  MeanAmplitudeSpectrum spectrum;
  if (needs_spectrum) {
    std::vector<Image> clean;
    clean.reserve(test.items.size());
    for (const auto& [img, label] : test.items) clean.push_back(img);
    spectrum = mean_amplitude_spectrum(clean);
  }

  OodResult result;
  result.clean_accuracy = evaluate_model(model, input_size, test).top1;

  double entry_sum = 0.0;
  for (const auto& entry : suite.entries) {
    double level_sum = 0.0;
    for (double level : entry.levels) {
      LabeledSet distorted;
      distorted.num_classes = test.num_classes;
      for (size_t i = 0; i < test.items.size(); ++i) {
        DistortionSpec spec{entry.kind, level};
        Image img = apply_distortion(test.items[i].first, spec,
                                     hash_mix(seed, static_cast<uint64_t>(entry.kind),
                                              static_cast<uint64_t>(i)),
                                     needs_spectrum ? &spectrum : nullptr);
        distorted.items.emplace_back(std::move(img), test.items[i].second);
      }
      double acc = evaluate_model(model, input_size, distorted).top1;
      result.per_condition.push_back({entry.kind, level, acc});
      level_sum += acc;
    }
    double entry_mean = level_sum / static_cast<double>(entry.levels.size());
    result.per_entry.emplace_back(distortion_name(entry.kind), entry_mean);
    entry_sum += entry_mean;
  }
  result.mean_ood = entry_sum / static_cast<double>(suite.entries.size());
  return result;
}

}  // namespace longview::eval
