#include "longview/tensor/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace longview {

double grad_rel_error(double analytic, double numeric) {
  double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

TensorPtr run_program(const Program& program, const std::vector<TensorPtr>& leaves) {
  if (leaves.size() != program.leaf_shapes.size())
    throw std::invalid_argument("run_program: expected " + std::to_string(program.leaf_shapes.size()) +
                                " leaves, got " + std::to_string(leaves.size()));
  std::vector<TensorPtr> slots = leaves;
  for (const auto& op : program.ops) {
    std::vector<TensorPtr> ins;
    ins.reserve(op.inputs.size());
    for (int slot : op.inputs) ins.push_back(slots.at(static_cast<size_t>(slot)));
    slots.push_back(forward(op.kind, ins, op.attrs));
  }
  return slots.back();
}

double run_program_f64(const Program& program, const std::vector<std::vector<double>>& leaves) {
  std::vector<DArray> slots;
  slots.reserve(leaves.size() + program.ops.size());
  for (size_t i = 0; i < leaves.size(); ++i) slots.push_back({program.leaf_shapes[i], leaves[i]});
  for (const auto& op : program.ops) {
    std::vector<DArray> ins;
    ins.reserve(op.inputs.size());
    for (int slot : op.inputs) ins.push_back(slots.at(static_cast<size_t>(slot)));
    slots.push_back(forward_f64(op.kind, ins, op.attrs));
  }
  const DArray& out = slots.back();
  if (out.data.size() != 1)
    throw std::invalid_argument("run_program_f64: program result is not scalar");
  return out.data[0];
}

GradCheckReport grad_check_at(const Program& program, const std::vector<TensorPtr>& leaves,
                              const GradCheckOptions& opts) {
  GradCheckReport report;

  // Analytic pass in float.
  Tape tape;
  auto loss = run_program(program, leaves);
  if (!loss->is_scalar())
    throw std::invalid_argument("grad_check: program must end in a scalar loss, got shape " +
                                shape_str(loss->shape));
  tape.backward(loss);

  // 64-bit base copy of the leaves.
  std::vector<std::vector<double>> base(leaves.size());
  for (size_t i = 0; i < leaves.size(); ++i)
    base[i].assign(leaves[i]->data.begin(), leaves[i]->data.end());

  report.analytic.resize(leaves.size());
  report.numeric.resize(leaves.size());
  for (size_t li = 0; li < leaves.size(); ++li) {
    if (!leaves[li]->requires_grad) continue;
    size_t n = leaves[li]->data.size();
    report.analytic[li].resize(n);
    report.numeric[li].resize(n);
    for (size_t j = 0; j < n; ++j) {
      double save = base[li][j];
      base[li][j] = save + opts.step;
      double up = run_program_f64(program, base);
      base[li][j] = save - opts.step;
      double down = run_program_f64(program, base);
      base[li][j] = save;
      double fd = (up - down) / (2.0 * opts.step);
      double an = static_cast<double>(leaves[li]->grad[j]);
      report.analytic[li][j] = an;
      report.numeric[li][j] = fd;
      double rel = grad_rel_error(an, fd);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_leaf = static_cast<int>(li);
        report.worst_index = static_cast<int64_t>(j);
      }
    }
  }
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

GradCheckReport grad_check(const Program& program, Rng& rng, const GradCheckOptions& opts) {
  for (int attempt = 0; attempt <= opts.max_resamples; ++attempt) {
    std::vector<TensorPtr> leaves;
    leaves.reserve(program.leaf_shapes.size());
    for (const auto& s : program.leaf_shapes)
      leaves.push_back(Tensor::uniform(s, rng, -opts.leaf_scale, opts.leaf_scale, /*requires_grad=*/true));

    reset_kink_margin();
    {
      NoGrad ng;
      run_program(program, leaves);
    }
    if (min_kink_margin() < opts.kink_margin) continue;

    auto report = grad_check_at(program, leaves, opts);
    report.resamples = attempt;
    return report;
  }
  throw std::runtime_error(
      "grad_check: could not find an evaluation point clear of relu/maxpool kinks after " +
      std::to_string(opts.max_resamples) + " resamples");
}

}  // namespace longview
