#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "longview/tensor/optim.hpp"
#include "longview/tensor/tensor.hpp"

namespace longview {

// Optimizer state as stored on disk.
struct OptimizerSnapshot {
  OptimizerConfig config;
  int64_t step_count = 0;
  std::vector<std::vector<float>> first_moments;   // parameter order
  std::vector<std::vector<float>> second_moments;
};

// Versioned binary container: parameter name -> shape + little-endian f32
// payload, plus optimizer state and free-form metadata.
struct CheckpointData {
  static constexpr uint32_t kFormatVersion = 1;

  NamedTensors params;
  NamedTensors extra;  // e.g. DINO teacher parameters and center vector
  std::optional<OptimizerSnapshot> optimizer;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::string& path, const CheckpointData& ckpt);
CheckpointData load_checkpoint(const std::string& path);

OptimizerSnapshot snapshot_optimizer(const Optimizer& opt);

}  // namespace longview
