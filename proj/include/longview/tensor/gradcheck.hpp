#pragma once

#include <functional>
#include <string>
#include <vector>

#include "longview/tensor/ops.hpp"

namespace longview {

// A straight-line op program over slots. Slots [0, leaves.size()) hold the
// leaf tensors; each op appends one result slot. The last slot must be the
// scalar loss.
struct ProgramOp {
  OpKind kind;
  std::vector<int> inputs;  // slot ids
  OpAttrs attrs;
};

struct Program {
  std::vector<Shape> leaf_shapes;
  std::vector<ProgramOp> ops;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-3;          // central-difference half step
  double kink_margin = 1e-2;   // reject points this close to a relu/maxpool kink
  int max_resamples = 400;
  float leaf_scale = 1.f;      // leaves drawn uniform in [-leaf_scale, leaf_scale]
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  int worst_leaf = -1;
  int64_t worst_index = -1;
  int resamples = 0;
  // Flat per-leaf gradients, for inspection and negative-control tests.
  std::vector<std::vector<double>> analytic;
  std::vector<std::vector<double>> numeric;
};

// rel = |a - b| / max(1, |a|, |b|)
double grad_rel_error(double analytic, double numeric);

// Runs the program forward in float with the tape, backward, then compares
// every leaf gradient against central finite differences evaluated on a
// 64-bit replay of the same program. Leaves are drawn from `rng`; evaluation
// points that land within `kink_margin` of a relu/maxpool non-differentiability
// are redrawn (central differences are invalid across a kink). Throws if the
// program never produces a scalar loss or a clean evaluation point.
GradCheckReport grad_check(const Program& program, Rng& rng, const GradCheckOptions& opts = {});

// Same, but on caller-provided leaves (no resampling).
GradCheckReport grad_check_at(const Program& program, const std::vector<TensorPtr>& leaves,
                              const GradCheckOptions& opts = {});

// Float forward of a program, with autograd when a tape is active.
TensorPtr run_program(const Program& program, const std::vector<TensorPtr>& leaves);

// 64-bit reference replay.
double run_program_f64(const Program& program, const std::vector<std::vector<double>>& leaves);

}  // namespace longview
