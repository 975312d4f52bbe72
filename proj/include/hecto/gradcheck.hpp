// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hecto/tensor.hpp"

namespace hecto {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double magnitude_floor = 1e-6;
};

/// Compares the analytic gradient of `loss_fn` against central differences
/// (f(x + eps) - f(x - eps)) / 2 eps for every element of every parameter.
/// `loss_fn` must be deterministic; parameter values are restored afterwards.
/// Throws NumericError naming the parameter when a loss or gradient is not
/// finite.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss_fn,
                                   std::span<const Parameter> params,
                                   const GradCheckOptions& options = {});

/// Smallest |input| over every ReLU node in the graph behind `output`, or
/// +inf when there is none. Central differences with step eps straddle the
/// kink when a perturbation moves one of these inputs across zero, so a
/// check is only meaningful when the margin is well above eps.
double kink_margin(const Tensor& output);

}  // namespace hecto
