// SPDX-License-Identifier: Apache-2.0
#include "hecto/losses.hpp"

#include <cmath>

#include "hecto/error.hpp"
#include "hecto/ops.hpp"

namespace hecto {

namespace {

void check_rows(const Tensor& g, const char* op) {
  if (g.rank() != 2 || g.dim(0) == 0 || g.dim(1) == 0) {
    throw DimensionError(std::string(op) + ": expected non-empty [B x K], got " + shape_string(g.shape()));
  }
  const std::size_t k = g.dim(1);
  for (std::size_t i = 0; i < g.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = g[i * k + j];
      if (!std::isfinite(v) || v < 0.0) throw ContractError(std::string(op) + ": invalid probability");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-6) {
      throw ContractError(std::string(op) + ": row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

}  // namespace

Tensor entropy_penalty(const Tensor& gate_probs) {
  check_rows(gate_probs, "entropy_penalty");
  const std::size_t n = gate_probs.size();
  const double inv_b = 1.0 / static_cast<double>(gate_probs.dim(0));
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = gate_probs[i];
    if (v > 0.0) h -= v * std::log(std::max(v, kEntropyClamp));
  }
  return Tensor::make_result("entropy_penalty", {}, {h * inv_b}, {gate_probs}, [inv_b](Node& self) {
    auto& G = self.inputs[0];
    for (std::size_t i = 0; i < G->data.size(); ++i) {
      const double v = std::max(G->data[i], kEntropyClamp);
      G->grad[i] += -self.grad[0] * inv_b * (std::log(v) + 1.0);
    }
  });
}

Tensor diversity_penalty(const Tensor& gate_probs) {
  check_rows(gate_probs, "diversity_penalty");
  const std::size_t b = gate_probs.dim(0);
  const std::size_t k = gate_probs.dim(1);
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < k; ++j) mass[j] += gate_probs[i * k + j];
  }
  double total = 0.0;
  for (double m : mass) total += m;
  std::vector<double> p(k);
  double sq = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    p[j] = mass[j] / total;
    sq += p[j] * p[j];
  }
  return Tensor::make_result("diversity_penalty", {}, {sq}, {gate_probs},
                             [p = std::move(p), total, sq, b, k](Node& self) {
                               auto& G = self.inputs[0];
                               for (std::size_t j = 0; j < k; ++j) {
                                 // d/dgbar_j of sum_l (gbar_l / S)^2
                                 const double d = self.grad[0] * 2.0 * (p[j] - sq) / total;
                                 for (std::size_t i = 0; i < b; ++i) G->grad[i * k + j] += d;
                               }
                             });
}

Tensor total_loss(const Tensor& task_loss, const Tensor& gate_probs, const LossWeights& weights) {
  if (weights.lambda_ent < 0.0 || weights.lambda_div < 0.0) {
    throw ParameterError("loss weights must be non-negative");
  }
  Tensor loss = task_loss;
  if (weights.lambda_ent != 0.0) loss = add(loss, scale(entropy_penalty(gate_probs), weights.lambda_ent));
  if (weights.lambda_div != 0.0) loss = add(loss, scale(diversity_penalty(gate_probs), weights.lambda_div));
  return loss;
}

}  // namespace hecto
