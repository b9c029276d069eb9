#pragma once

#include <functional>
#include <vector>

#include "longview/tensor/tensor.hpp"

namespace longview {

// Wengert list. Ops executed while a Tape is in scope (and grad mode is on)
// record a backward closure; backward() replays them once in reverse.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(const char* op_name, std::function<void()> backward_fn);

  struct BackwardStats {
    int ops_visited = 0;
    bool detached = false;  // loss not connected to any recorded op
  };

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
  // accumulate; call zero_grad on parameters between backward passes if
  // accumulation is not wanted. Throws if loss is not scalar.
  BackwardStats backward(const TensorPtr& loss);

  size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  struct Op {
    const char* name;
    std::function<void()> backward;
  };
  std::vector<Op> ops_;
};

// RAII guard disabling gradient recording (forward passes only).
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
};

bool grad_enabled();

}  // namespace longview
