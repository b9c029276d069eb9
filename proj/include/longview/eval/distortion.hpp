#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "longview/eval/protocols.hpp"
#include "longview/image.hpp"

namespace longview::eval {

enum class DistortionKind {
  contrast,
  uniform_noise,
  low_pass,
  high_pass,
  phase_scrambling,
  power_equalization,
  false_color,
  rotation,
  grayscale,
};

const char* distortion_name(DistortionKind k);

struct DistortionSpec {
  DistortionKind kind;
  double parameter = 0.0;

  void validate() const;
};

// Identity parameter value for kinds that have one (contrast 1, noise 0,
// low_pass 0, rotation 0, phase_scrambling 0).
std::optional<double> identity_parameter(DistortionKind k);

// Per-channel mean DFT amplitude over a dataset; the reference spectrum for
// power equalization.
struct MeanAmplitudeSpectrum {
  int height = 0, width = 0;
  std::vector<double> amp;  // 3 * height * width, channel-major
};

MeanAmplitudeSpectrum mean_amplitude_spectrum(const std::vector<Image>& frames);

// `seed` drives the stochastic kinds (uniform_noise, phase_scrambling);
// `mean_amp` is required for power_equalization.
Image apply_distortion(const Image& frame, const DistortionSpec& spec, uint64_t seed = 0,
                       const MeanAmplitudeSpectrum* mean_amp = nullptr);

// DFT amplitudes of one channel (row-major h*w), for spectrum assertions.
std::vector<double> channel_amplitude_spectrum(const Image& frame, int channel);

struct SuiteEntry {
  DistortionKind kind;
  std::vector<double> levels;
};

struct OodSuite {
  std::vector<SuiteEntry> entries;
  int practice_size = 320;

  // The parametric battery: contrast, uniform noise, low-/high-pass,
  // phase scrambling, power equalization, false color, rotation, grayscale.
  static OodSuite default_suite();
  void validate() const;
};

// Full-scale category names, retained for report labeling.
extern const std::vector<std::string> kBasicCategories;

struct OodConditionResult {
  DistortionKind kind;
  double parameter = 0.0;
  double accuracy = 0.0;  // percent
};

struct OodResult {
  std::vector<OodConditionResult> per_condition;        // one per (kind, level)
  std::vector<std::pair<std::string, double>> per_entry;  // kind-level means
  double mean_ood = 0.0;   // unweighted mean over suite entries
  double clean_accuracy = 0.0;
};

OodResult ood_eval(const train::TemporalClassModel& model, int input_size, const OodSuite& suite,
                   const LabeledSet& test, uint64_t seed);

}  // namespace longview::eval
