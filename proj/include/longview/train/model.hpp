#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "longview/image.hpp"
#include "longview/tensor/ops.hpp"
#include "longview/tensor/tensor.hpp"

namespace longview::train {

struct BackboneSpec {
  // (channels, stride) per conv stage; 3x3 kernels, zero padding 1.
  std::vector<std::pair<int, int>> stages = {{16, 2}, {32, 2}, {64, 2}};
  int kernel = 3;
  int embedding_dim = 128;

  std::string to_string() const;
  static BackboneSpec parse(const std::string& stages_str, int kernel, int embedding_dim);
};

// Small convolutional encoder: conv+relu stages, global average pool, linear
// projection to the embedding. Input must be square (N,3,S,S).
class ConvBackbone {
 public:
  ConvBackbone() = default;
  ConvBackbone(const BackboneSpec& spec, uint64_t seed);

  TensorPtr forward(const TensorPtr& images) const;  // (N,3,S,S) -> (N,D)

  const BackboneSpec& spec() const { return spec_; }
  NamedTensors& params() { return params_; }
  const NamedTensors& params() const { return params_; }

  // Replaces parameter values with those found under `prefix` in `source`.
  void load_params(const NamedTensors& source, const std::string& prefix);

 private:
  BackboneSpec spec_;
  NamedTensors params_;
};

class LinearHead {
 public:
  LinearHead() = default;
  LinearHead(int in_dim, int out_dim, uint64_t seed, bool zero_init = true);

  TensorPtr forward(const TensorPtr& x) const;

  int out_dim() const { return out_dim_; }
  NamedTensors& params() { return params_; }
  const NamedTensors& params() const { return params_; }
  void load_params(const NamedTensors& source, const std::string& prefix);

 private:
  int out_dim_ = 0;
  NamedTensors params_;
};

// Two-layer relu MLP (the projection head for self-distillation).
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(int in_dim, int hidden_dim, int out_dim, uint64_t seed);

  TensorPtr forward(const TensorPtr& x) const;

  int out_dim() const { return out_dim_; }
  NamedTensors& params() { return params_; }
  const NamedTensors& params() const { return params_; }
  void load_params(const NamedTensors& source, const std::string& prefix);

 private:
  int out_dim_ = 0;
  NamedTensors params_;
};

// HWC images (all the same size) -> (N,3,H,W) tensor.
TensorPtr images_to_batch(const std::vector<Image>& frames);

// Concatenates `prefix + name` entries for each listed parameter group.
NamedTensors prefixed(const std::string& prefix, const NamedTensors& params);

void set_requires_grad(NamedTensors& params, bool rg);

// Deep copy with fresh buffers.
NamedTensors clone_params(const NamedTensors& params);

uint64_t params_hash(const NamedTensors& params);

}  // namespace longview::train
