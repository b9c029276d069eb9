#pragma once

#include <vector>

#include "longview/tensor/tape.hpp"
#include "longview/tensor/tensor.hpp"

namespace longview {

// Elementwise, same shape.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
// (M,K) x (K,N) -> (M,N)
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// x: (N,C,H,W), w: (Co,Ci,Kh,Kw), bias: (Co) or null. Zero padding.
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 int stride, int padding);
TensorPtr avgpool2d(const TensorPtr& x, int kernel, int stride);
TensorPtr maxpool2d(const TensorPtr& x, int kernel, int stride);
TensorPtr relu(const TensorPtr& x);
// x: (N,In) or (N,In,1,1); w: (In,Out); bias: (Out) or null.
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias);
// Over the last dimension.
TensorPtr softmax(const TensorPtr& x);
TensorPtr log_softmax(const TensorPtr& x);
// logits: (N,C); targets: N class indices. Mean negative log likelihood.
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets);
TensorPtr mean(const TensorPtr& x);
TensorPtr sum(const TensorPtr& x);
TensorPtr scale(const TensorPtr& x, float factor);
TensorPtr concat(const std::vector<TensorPtr>& xs, int axis);
// x: (N,C,H,W) -> (N,C,out_h,out_w), half-pixel centers.
TensorPtr bilinear_resize(const TensorPtr& x, int out_h, int out_w);

enum class OpKind {
  add,
  mul,
  matmul,
  conv2d,
  avgpool2d,
  maxpool2d,
  relu,
  linear,
  log_softmax,
  softmax,
  cross_entropy,
  mean,
  sum,
  scale,
  concat,
  bilinear_resize,
};

const char* op_name(OpKind k);

struct OpAttrs {
  int stride = 1;
  int padding = 0;
  int kernel = 2;
  int out_h = 0, out_w = 0;
  int axis = 0;
  float factor = 1.f;
  std::vector<int> targets;  // cross_entropy
};

// Generic dispatcher over the op vocabulary; used by the gradient checker
// and anywhere ops are driven by data rather than code.
TensorPtr forward(OpKind kind, const std::vector<TensorPtr>& inputs, const OpAttrs& attrs);

// 64-bit reference forward (no autograd); mirrors forward() exactly.
struct DArray {
  Shape shape;
  std::vector<double> data;
};
DArray forward_f64(OpKind kind, const std::vector<DArray>& inputs, const OpAttrs& attrs);

// Distance from the nearest relu/maxpool non-differentiability seen since the
// last reset; the gradient checker rejects evaluation points that sit too
// close to a kink, where central differences are meaningless.
void reset_kink_margin();
double min_kink_margin();

}  // namespace longview
