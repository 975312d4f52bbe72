// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hecto/rng.hpp"
#include "hecto/tensor.hpp"

namespace hecto {

enum class ExpertKind { ffnn, gru, tcn };
enum class TaskMode { classification, regression };
enum class Phase { train, eval };

std::string_view to_string(ExpertKind kind);
ExpertKind parse_expert_kind(std::string_view name);

struct ExpertDims {
  std::size_t d_proj = 16;
  std::size_t d_hid = 8;
  TaskMode mode = TaskMode::classification;
  std::size_t num_classes = 2;
  double tcn_dropout = 0.1;

  std::size_t outputs() const { return mode == TaskMode::classification ? num_classes : 1; }
};

/// Linear output head: class logits [B x C], or one scalar per sample.
class OutputHead {
 public:
  OutputHead() = default;
  OutputHead(const ExpertDims& dims, Rng& rng);
  OutputHead(TaskMode mode, Tensor weight, Tensor bias);

  /// [B x outputs] in either mode.
  Tensor apply(const Tensor& hidden) const;
  /// Regression prediction per sample, shape [B]. Throws ModeError for a
  /// classification head.
  Tensor regress(const Tensor& hidden) const;

  TaskMode mode() const { return mode_; }
  Tensor weight;  // [d_hid x outputs]
  Tensor bias;    // [outputs]

 private:
  TaskMode mode_ = TaskMode::classification;
};

struct ExpertOutput {
  Tensor hidden;  // [n x d_hid]
  Tensor output;  // [n x outputs]
};

/// hidden = tanh(z W1 + b1), output = head(hidden). Sees only the summary
/// projection.
struct FfnnExpert {
  Tensor w1;  // [d_proj x d_hid]
  Tensor b1;  // [d_hid]
  OutputHead head;

  ExpertOutput forward(const Tensor& summary) const;
};

struct GruCellParams {
  Tensor w_update, u_update, b_update;
  Tensor w_reset, u_reset, b_reset;
  Tensor w_cand, u_cand, b_cand;
};

/// u = sig(x Wu + h Uu + bu), r = sig(x Wr + h Ur + br),
/// c = tanh(x Wh + (r * h) Uh + bh), h' = (1 - u) * h + u * c.
Tensor gru_cell(const GruCellParams& p, const Tensor& x, const Tensor& h_prev);

/// Single-layer GRU over the projected sequence, h0 = 0, stopping at each
/// sample's true length.
struct GruExpert {
  GruCellParams cell;
  OutputHead head;

  ExpertOutput forward(const Tensor& sequence, std::span<const int> lengths) const;
};

/// One residual block of two causal convolutions (kernel 3, dilations 1 and
/// 2) with ReLU and dropout between them. The residual path is a 1x1
/// projection when d_proj != d_hid and the identity otherwise.
struct TcnExpert {
  static constexpr std::size_t kTaps = 3;
  static constexpr std::size_t kDilation1 = 1;
  static constexpr std::size_t kDilation2 = 2;

  Tensor conv1_kernel;  // [3 x d_proj x d_hid]
  Tensor conv1_bias;
  Tensor conv2_kernel;  // [3 x d_hid x d_hid]
  Tensor conv2_bias;
  std::optional<Tensor> residual;  // [d_proj x d_hid]
  double dropout_rate = 0.1;
  OutputHead head;

  /// Per-position block output [n x T x d_hid] before the last-step pick.
  Tensor block(const Tensor& sequence, Phase phase, Rng* rng) const;
  ExpertOutput forward(const Tensor& sequence, std::span<const int> lengths, Phase phase, Rng* rng) const;
};

using Expert = std::variant<FfnnExpert, GruExpert, TcnExpert>;

Expert make_expert(ExpertKind kind, const ExpertDims& dims, Rng& rng);
ExpertKind kind_of(const Expert& expert);

/// Dispatches on the expert kind: FFNN consumes `summary`, GRU and TCN consume
/// `sequence` and `lengths`.
ExpertOutput expert_forward(const Expert& expert, const Tensor& summary, const Tensor& sequence,
                            std::span<const int> lengths, Phase phase, Rng* rng);

void collect_parameters(const Expert& expert, const std::string& prefix, std::vector<Parameter>& out);

}  // namespace hecto
