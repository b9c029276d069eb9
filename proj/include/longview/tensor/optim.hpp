#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "longview/tensor/tensor.hpp"

namespace longview {

enum class OptKind { adam, adamw };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  float lr = 5e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.f;                 // adamw only
  std::optional<float> grad_clip;           // global L2 threshold
};

// Scale all grads so the global L2 norm is at most `threshold`; returns the
// pre-clip norm. No-op when the norm is already within the threshold.
float clip_global_grad_norm(const std::vector<TensorPtr>& params, float threshold);

// target <- momentum * target + (1 - momentum) * source, elementwise.
void ema_update(const std::vector<TensorPtr>& target, const std::vector<TensorPtr>& source,
                float momentum);

class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, NamedTensors params);

  // Applies configured clipping then one Adam/AdamW update with bias
  // correction. Returns the pre-clip global gradient norm. Throws if any
  // parameter is missing its gradient buffer or has non-finite gradients.
  float step();

  void zero_grad();

  int64_t step_count() const { return step_count_; }
  const OptimizerConfig& config() const { return cfg_; }
  const NamedTensors& params() const { return params_; }

  // Moment buffers in parameter order, for checkpointing.
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void restore_state(int64_t step_count, std::vector<std::vector<float>> m,
                     std::vector<std::vector<float>> v);

 private:
  OptimizerConfig cfg_;
  NamedTensors params_;
  std::vector<std::vector<float>> m_, v_;
  int64_t step_count_ = 0;
};

}  // namespace longview
