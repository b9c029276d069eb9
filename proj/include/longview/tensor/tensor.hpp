#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "longview/rng.hpp"

namespace longview {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// 32-bit float n-d array with an optional same-shape gradient buffer.
class Tensor {
 public:
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty unless requires_grad
  bool requires_grad = false;

  Tensor() = default;
  Tensor(Shape s, std::vector<float> values);

  static TensorPtr create(Shape s, std::vector<float> values, bool requires_grad = false);
  static TensorPtr zeros(Shape s, bool requires_grad = false);
  static TensorPtr full(Shape s, float v, bool requires_grad = false);
  static TensorPtr scalar(float v, bool requires_grad = false);
  static TensorPtr randn(Shape s, Rng& rng, float stddev = 1.f, bool requires_grad = false);
  static TensorPtr uniform(Shape s, Rng& rng, float lo, float hi, bool requires_grad = false);

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool is_scalar() const { return size() == 1; }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  // Scalar value; throws if not scalar.
  float item() const;

  void set_requires_grad(bool rg);
  void ensure_grad();  // allocates a zero grad buffer if missing
  void zero_grad();
  bool all_finite() const;
  bool grad_all_finite() const;
};

// Named parameter list; order is the canonical serialization order.
using NamedTensors = std::vector<std::pair<std::string, TensorPtr>>;

std::vector<TensorPtr> values_of(const NamedTensors& named);

}  // namespace longview
