#include "longview/tensor/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace longview {

float clip_global_grad_norm(const std::vector<TensorPtr>& params, float threshold) {
  if (threshold <= 0.f) throw std::invalid_argument("clip_global_grad_norm: threshold must be > 0");
  double sq = 0.0;
  for (const auto& p : params)
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  float norm = static_cast<float>(std::sqrt(sq));
  if (norm > threshold) {
    float s = threshold / norm;
    for (const auto& p : params)
      for (float& g : p->grad) g *= s;
  }
  return norm;
}

void ema_update(const std::vector<TensorPtr>& target, const std::vector<TensorPtr>& source,
                float momentum) {
  if (momentum < 0.f || momentum > 1.f)
    throw std::invalid_argument("ema_update: momentum must be in [0,1], got " + std::to_string(momentum));
  if (target.size() != source.size())
    throw std::invalid_argument("ema_update: parameter list size mismatch");
  for (size_t i = 0; i < target.size(); ++i) {
    if (!same_shape(target[i]->shape, source[i]->shape))
      throw std::invalid_argument("ema_update: shape mismatch at parameter " + std::to_string(i) +
                                  ": " + shape_str(target[i]->shape) + " vs " + shape_str(source[i]->shape));
    for (size_t j = 0; j < target[i]->data.size(); ++j)
      target[i]->data[j] = momentum * target[i]->data[j] + (1.f - momentum) * source[i]->data[j];
  }
}

Optimizer::Optimizer(OptimizerConfig cfg, NamedTensors params)
    : cfg_(cfg), params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p->data.size(), 0.f);
    v_.emplace_back(p->data.size(), 0.f);
  }
}

float Optimizer::step() {
  std::vector<TensorPtr> plist;
  plist.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    if (p->grad.size() != p->data.size())
      throw std::runtime_error("optimizer_step: parameter '" + name + "' has no gradient");
    if (!p->grad_all_finite())
      throw std::runtime_error("optimizer_step: non-finite gradient in parameter '" + name + "'");
    plist.push_back(p);
  }
  double sq = 0.0;
  for (const auto& p : plist)
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  float pre_clip_norm = static_cast<float>(std::sqrt(sq));
  if (cfg_.grad_clip) clip_global_grad_norm(plist, *cfg_.grad_clip);

  ++step_count_;
  float bc1 = 1.f - std::pow(cfg_.beta1, static_cast<float>(step_count_));
  float bc2 = 1.f - std::pow(cfg_.beta2, static_cast<float>(step_count_));
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < p->data.size(); ++j) {
      // Decoupled decay, independent of the moment update.
      if (cfg_.kind == OptKind::adamw && cfg_.weight_decay != 0.f)
        p->data[j] -= cfg_.lr * cfg_.weight_decay * p->data[j];
      float g = p->grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.f - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.f - cfg_.beta2) * g * g;
      float mhat = m[j] / bc1;
      float vhat = v[j] / bc2;
      p->data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    if (!p->all_finite())
      throw std::runtime_error("optimizer_step: non-finite value in parameter '" + params_[i].first +
                               "' after update");
  }
  return pre_clip_norm;
}

void Optimizer::zero_grad() {
  for (const auto& [name, p] : params_) p->zero_grad();
}

void Optimizer::restore_state(int64_t step_count, std::vector<std::vector<float>> m,
                              std::vector<std::vector<float>> v) {
  if (m.size() != params_.size() || v.size() != params_.size())
    throw std::invalid_argument("Optimizer::restore_state: moment count mismatch");
  for (size_t i = 0; i < params_.size(); ++i)
    if (m[i].size() != params_[i].second->data.size() || v[i].size() != params_[i].second->data.size())
      throw std::invalid_argument("Optimizer::restore_state: moment shape mismatch for '" +
                                  params_[i].first + "'");
  step_count_ = step_count;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace longview
