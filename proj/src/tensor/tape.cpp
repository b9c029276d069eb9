#include "longview/tensor/tape.hpp"

#include <stdexcept>

namespace longview {

namespace {
thread_local std::vector<Tape*> g_tape_stack;
thread_local int g_no_grad_depth = 0;
}  // namespace

Tape::Tape() { g_tape_stack.push_back(this); }

Tape::~Tape() {
  if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

Tape* Tape::active() {
  if (g_no_grad_depth > 0 || g_tape_stack.empty()) return nullptr;
  return g_tape_stack.back();
}

void Tape::record(const char* op_name, std::function<void()> backward_fn) {
  ops_.push_back({op_name, std::move(backward_fn)});
}

Tape::BackwardStats Tape::backward(const TensorPtr& loss) {
  if (!loss) throw std::invalid_argument("backward: null loss tensor");
  if (!loss->is_scalar())
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(loss->shape));
  BackwardStats stats;
  if (ops_.empty() || !loss->requires_grad) {
    stats.detached = true;
    return stats;
  }
  loss->ensure_grad();
  loss->grad[0] += 1.f;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    it->backward();
    ++stats.ops_visited;
  }
  return stats;
}

NoGrad::NoGrad() { ++g_no_grad_depth; }
NoGrad::~NoGrad() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0 && !g_tape_stack.empty(); }

}  // namespace longview
