// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hecto/encoder.hpp"
#include "hecto/experts.hpp"
#include "hecto/rng.hpp"
#include "hecto/tensor.hpp"

namespace hecto {

enum class GateInput { summary, mean_pool };
enum class RoutingPolicy { hard_top1, top2, soft };

std::string_view to_string(GateInput v);
std::string_view to_string(RoutingPolicy v);
GateInput parse_gate_input(std::string_view name);
RoutingPolicy parse_routing_policy(std::string_view name);

struct GateConfig {
  double tau = 1.5;
  GateInput input = GateInput::summary;
  RoutingPolicy policy = RoutingPolicy::hard_top1;
  std::size_t d_hidden = 16;

  void validate(std::size_t num_experts) const;
};

struct ModelConfig {
  EncoderConfig encoder;
  ExpertDims dims;
  GateConfig gate;
  std::vector<ExpertKind> experts{ExpertKind::ffnn, ExpertKind::gru};

  void validate() const;
};

/// Routing of one sample: soft gate probabilities, the experts that execute,
/// and the forward mixture weights (zero outside `selected`).
struct RoutingDecision {
  std::vector<double> probs;
  std::vector<std::size_t> selected;
  std::vector<double> weights;
};

/// Picks experts for one gate row.
///   hard_top1/train: categorical sample from g; weights one-hot
///   hard_top1/eval:  argmax, lowest index on ties; weights one-hot
///   top2:            two largest entries, weights renormalized over them
///   soft:            every expert, weights = g
/// Throws NumericError when g is not a finite probability vector.
RoutingDecision route(std::span<const double> probs, RoutingPolicy policy, Phase phase, Rng* rng);

struct ForwardResult {
  Tensor predictions;  // [B x outputs]
  Tensor gate_probs;   // [B x K], soft probabilities for the loss
  std::vector<RoutingDecision> decisions;
  /// Number of samples each expert actually processed.
  std::vector<std::size_t> expert_calls;
};

struct Affine {
  Tensor weight;
  Tensor bias;
};

struct GateNetwork {
  Affine hidden;  // d_proj -> d_gate_hidden, ReLU
  Affine output;  // d_gate_hidden -> K
};

/// Encoder, dual projections, gate and expert pool. Only the experts a sample
/// is routed to are evaluated on it.
class HectoModel {
 public:
  HectoModel(const ModelConfig& config, std::uint64_t seed);

  /// With `fixed` set, the selections are taken from it instead of being
  /// sampled, and under hard_top1/train its `probs` serve as the
  /// stop-gradient reference of the straight-through estimator. This makes the
  /// training-mode loss a deterministic function of the parameters.
  ForwardResult forward(const TokenBatch& batch, Phase phase, Rng* rng,
                        const std::vector<RoutingDecision>* fixed = nullptr) const;

  Tensor encode(const TokenBatch& batch) const { return encoder_.encode(batch); }
  /// z = ReLU(H[:, 0] Wc + bc)
  Tensor project_summary(const Tensor& encoded) const;
  /// H' = H[:, 1:] Ws + bs, per position.
  Tensor project_sequence(const Tensor& encoded) const;
  /// z, or the summary projection applied to the mean of the token slots.
  Tensor gate_input(const Tensor& encoded, const Tensor& summary, std::span<const int> lengths) const;
  /// g = softmax_tau(ReLU(x W1 + b1) W2 + b2)
  Tensor gate_forward(const Tensor& gate_in) const;

  const ModelConfig& config() const { return config_; }
  std::size_t num_experts() const { return experts_.size(); }
  TaskMode mode() const { return config_.dims.mode; }

  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  const Affine& summary_projection() const { return summary_proj_; }
  const Affine& sequence_projection() const { return sequence_proj_; }
  const GateNetwork& gate() const { return gate_; }
  const Expert& expert(std::size_t k) const { return experts_.at(k); }

  /// Flat registry; every parameter appears exactly once.
  std::vector<Parameter> parameters() const;
  /// Registry entries owned by one expert.
  std::vector<Parameter> expert_parameters(std::size_t k) const;

 private:
  ModelConfig config_;
  Encoder encoder_;
  Affine summary_proj_;
  Affine sequence_proj_;
  GateNetwork gate_;
  std::vector<Expert> experts_;
};

/// m = hard + (g - reference): forward value is `hard` when g equals the
/// reference, gradient passes to g unchanged.
Tensor straight_through(const Tensor& probs, std::span<const double> hard, std::span<const double> reference);

/// Per row, g restricted to `selected` and renormalized to sum 1.
Tensor renormalize_selected(const Tensor& probs, const std::vector<std::vector<std::size_t>>& selected);

/// out[i] = sum over experts k executed on sample i of mix[i, k] * outputs[k][row of i].
/// `rows[k]` lists the samples expert k processed, in the order of outputs[k].
Tensor mixture_combine(const std::vector<Tensor>& outputs, const std::vector<std::vector<std::size_t>>& rows,
                       const Tensor& mix, std::size_t batch, std::size_t width);

std::string expert_pool_name(std::span<const ExpertKind> experts);

}  // namespace hecto
