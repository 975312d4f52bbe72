// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hecto/tensor.hpp"

namespace hecto {

struct LossWeights {
  double lambda_ent = 0.05;
  double lambda_div = 0.08;
};

/// Smallest probability fed to the logarithm of the entropy term.
inline constexpr double kEntropyClamp = 1e-12;

/// -(1/B) sum_i sum_k g_ik ln g_ik over a [B x K] gate matrix, in nats.
/// Throws ContractError if a row does not sum to 1 within 1e-6.
Tensor entropy_penalty(const Tensor& gate_probs);

/// sum_k p_k^2 with p_k = gbar_k / sum_l gbar_l and gbar_k = sum_i g_ik.
/// Lies in [1/K, 1] and is minimal exactly at uniform usage.
Tensor diversity_penalty(const Tensor& gate_probs);

/// task + lambda_ent * entropy + lambda_div * diversity. A zero weight drops
/// its term entirely, so both zero returns `task_loss` itself.
Tensor total_loss(const Tensor& task_loss, const Tensor& gate_probs, const LossWeights& weights);

}  // namespace hecto
