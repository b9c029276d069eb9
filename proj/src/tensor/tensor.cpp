#include "longview/tensor/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace longview {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor::Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {
  for (int d : shape)
    if (d <= 0) throw std::invalid_argument("Tensor: dimension sizes must be positive, got " + shape_str(shape));
  if (static_cast<int64_t>(data.size()) != shape_numel(shape))
    throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
}

TensorPtr Tensor::create(Shape s, std::vector<float> values, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(s), std::move(values));
  t->set_requires_grad(requires_grad);
  return t;
}

TensorPtr Tensor::zeros(Shape s, bool requires_grad) {
  int64_t n = shape_numel(s);
  return create(std::move(s), std::vector<float>(static_cast<size_t>(n), 0.f), requires_grad);
}

TensorPtr Tensor::full(Shape s, float v, bool requires_grad) {
  int64_t n = shape_numel(s);
  return create(std::move(s), std::vector<float>(static_cast<size_t>(n), v), requires_grad);
}

TensorPtr Tensor::scalar(float v, bool requires_grad) {
  return create({1}, {v}, requires_grad);
}

TensorPtr Tensor::randn(Shape s, Rng& rng, float stddev, bool requires_grad) {
  int64_t n = shape_numel(s);
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.normal()) * stddev;
  return create(std::move(s), std::move(v), requires_grad);
}

TensorPtr Tensor::uniform(Shape s, Rng& rng, float lo, float hi, bool requires_grad) {
  int64_t n = shape_numel(s);
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return create(std::move(s), std::move(v), requires_grad);
}

float Tensor::item() const {
  if (!is_scalar()) throw std::invalid_argument("Tensor::item: tensor of shape " + shape_str(shape) + " is not scalar");
  return data[0];
}

void Tensor::set_requires_grad(bool rg) {
  requires_grad = rg;
  if (rg)
    ensure_grad();
  else
    grad.clear();
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.f);
}

void Tensor::zero_grad() {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.f);
}

bool Tensor::all_finite() const {
  for (float v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

bool Tensor::grad_all_finite() const {
  for (float v : grad)
    if (!std::isfinite(v)) return false;
  return true;
}

std::vector<TensorPtr> values_of(const NamedTensors& named) {
  std::vector<TensorPtr> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

}  // namespace longview
