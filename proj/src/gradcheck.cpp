// SPDX-License-Identifier: Apache-2.0
#include "hecto/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include "hecto/error.hpp"

namespace hecto {

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn,
                                   std::span<const Parameter> params,
                                   const GradCheckOptions& options) {
  for (const auto& p : params) {
    Tensor t = p.value;
    t.zero_grad();
  }
  Tensor loss = loss_fn();
  if (!std::isfinite(loss.item())) throw NumericError("finite_diff_check: loss is not finite");
  loss.backward();

  GradCheckReport report;
  NoGradGuard no_grad;
  for (const auto& p : params) {
    Tensor t = p.value;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    GradCheckEntry entry{p.name};
    auto values = t.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(analytic[i])) {
        throw NumericError("finite_diff_check: non-finite gradient in " + p.name + "[" +
                           std::to_string(i) + "]");
      }
      const double saved = values[i];
      values[i] = saved + options.epsilon;
      const double up = loss_fn().item();
      values[i] = saved - options.epsilon;
      const double down = loss_fn().item();
      values[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss when perturbing " + p.name + "[" +
                           std::to_string(i) + "]");
      }
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double abs_err = std::abs(numeric - analytic[i]);
      const double denom =
          std::max({std::abs(numeric), std::abs(analytic[i]), options.magnitude_floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    entry.passed = entry.max_rel_error < options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

double kink_margin(const Tensor& output) {
  double margin = std::numeric_limits<double>::infinity();
  std::vector<const Node*> stack{output.node().get()};
  std::unordered_set<const Node*> seen;
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n == nullptr || !seen.insert(n).second) continue;
    if (std::strcmp(n->op, "relu") == 0) {
      for (double x : n->inputs.front()->data) margin = std::min(margin, std::abs(x));
    }
    for (const auto& in : n->inputs) stack.push_back(in.get());
  }
  return margin;
}

}  // namespace hecto
