// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "hecto/tensor.hpp"

namespace hecto {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

/// Decoupled weight decay Adam over a fixed parameter registry. Parameters
/// that do not require gradients at step time are left untouched, moments
/// included.
class AdamW {
 public:
  AdamW(std::vector<Parameter> params, const AdamWConfig& config);

  /// Throws NumericError naming the first parameter with a non-finite
  /// gradient; no parameter is modified in that case.
  void step();
  void zero_grad();

  std::size_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  std::vector<Parameter> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamWConfig config_;
  std::size_t step_ = 0;
};

}  // namespace hecto
