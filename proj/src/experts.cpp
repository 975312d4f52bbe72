// SPDX-License-Identifier: Apache-2.0
#include "hecto/experts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "hecto/error.hpp"
#include "hecto/ops.hpp"

namespace hecto {

namespace {

Tensor uniform_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor zero_bias(std::size_t n) { return Tensor::zeros({n}, true); }

void check_lengths(std::span<const int> lengths) {
  for (int len : lengths) {
    if (len < 1) throw DataError("expert input has a sequence of length " + std::to_string(len));
  }
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) { return add_bias(matmul(x, w), b); }

}  // namespace

std::string_view to_string(ExpertKind kind) {
  switch (kind) {
    case ExpertKind::ffnn:
      return "ffnn";
    case ExpertKind::gru:
      return "gru";
    case ExpertKind::tcn:
      return "tcn";
  }
  return "?";
}

ExpertKind parse_expert_kind(std::string_view name) {
  if (name == "ffnn" || name == "ff") return ExpertKind::ffnn;
  if (name == "gru") return ExpertKind::gru;
  if (name == "tcn") return ExpertKind::tcn;
  throw ParameterError("unknown expert kind '" + std::string(name) + "'");
}

OutputHead::OutputHead(const ExpertDims& dims, Rng& rng)
    : weight(uniform_weight({dims.d_hid, dims.outputs()}, dims.d_hid, rng)),
      bias(zero_bias(dims.outputs())),
      mode_(dims.mode) {}

OutputHead::OutputHead(TaskMode mode, Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)), mode_(mode) {}

Tensor OutputHead::apply(const Tensor& hidden) const {
  if (hidden.rank() != 2 || hidden.dim(1) != weight.dim(0)) {
    throw DimensionError("output head expects [n x " + std::to_string(weight.dim(0)) + "], got " +
                         shape_string(hidden.shape()));
  }
  return affine(hidden, weight, bias);
}

Tensor OutputHead::regress(const Tensor& hidden) const {
  if (mode_ != TaskMode::regression) throw ModeError("regression head used on a classification model");
  return reshape(apply(hidden), {hidden.dim(0)});
}

ExpertOutput FfnnExpert::forward(const Tensor& summary) const {
  if (summary.rank() != 2 || summary.dim(1) != w1.dim(0)) {
    throw DimensionError("ffnn expert expects [n x " + std::to_string(w1.dim(0)) + "], got " +
                         shape_string(summary.shape()));
  }
  Tensor hidden = tanh(affine(summary, w1, b1));
  return {hidden, head.apply(hidden)};
}

Tensor gru_cell(const GruCellParams& p, const Tensor& x, const Tensor& h_prev) {
  Tensor u = sigmoid(add(matmul(x, p.w_update), affine(h_prev, p.u_update, p.b_update)));
  Tensor r = sigmoid(add(matmul(x, p.w_reset), affine(h_prev, p.u_reset, p.b_reset)));
  Tensor cand = tanh(add(matmul(x, p.w_cand), affine(mul(r, h_prev), p.u_cand, p.b_cand)));
  // (1 - u) * h + u * c, written as h + u * (c - h)
  return add(h_prev, mul(u, sub(cand, h_prev)));
}

ExpertOutput GruExpert::forward(const Tensor& sequence, std::span<const int> lengths) const {
  if (sequence.rank() != 3 || sequence.dim(2) != cell.w_update.dim(0)) {
    throw DimensionError("gru expert expects [n x T x " + std::to_string(cell.w_update.dim(0)) + "], got " +
                         shape_string(sequence.shape()));
  }
  if (lengths.size() != sequence.dim(0)) throw DimensionError("gru expert: lengths do not match batch");
  check_lengths(lengths);
  const std::size_t n = sequence.dim(0);
  const std::size_t steps = lengths.empty() ? 0 : static_cast<std::size_t>(*std::max_element(lengths.begin(), lengths.end()));
  if (steps > sequence.dim(1)) throw DataError("gru expert: length exceeds sequence steps");
  Tensor h = Tensor::zeros({n, cell.u_update.dim(0)});
  std::vector<std::uint8_t> active(n);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < n; ++i) active[i] = static_cast<std::size_t>(lengths[i]) > t ? 1 : 0;
    Tensor next = gru_cell(cell, time_step(sequence, t), h);
    h = masked_update(next, h, active);
  }
  return {h, head.apply(h)};
}

Tensor TcnExpert::block(const Tensor& sequence, Phase phase, Rng* rng) const {
  if (sequence.rank() != 3 || sequence.dim(2) != conv1_kernel.dim(1)) {
    throw DimensionError("tcn expert expects [n x T x " + std::to_string(conv1_kernel.dim(1)) + "], got " +
                         shape_string(sequence.shape()));
  }
  Tensor a = relu(causal_conv1d(sequence, conv1_kernel, conv1_bias, kDilation1));
  a = dropout(a, dropout_rate, phase == Phase::train, rng);
  Tensor c = causal_conv1d(a, conv2_kernel, conv2_bias, kDilation2);
  Tensor skip = residual ? matmul(sequence, *residual) : sequence;
  return add(c, skip);
}

ExpertOutput TcnExpert::forward(const Tensor& sequence, std::span<const int> lengths, Phase phase, Rng* rng) const {
  check_lengths(lengths);
  Tensor hidden = last_step(block(sequence, phase, rng), lengths);
  return {hidden, head.apply(hidden)};
}

Expert make_expert(ExpertKind kind, const ExpertDims& dims, Rng& rng) {
  const auto dp = dims.d_proj;
  const auto dh = dims.d_hid;
  switch (kind) {
    case ExpertKind::ffnn: {
      FfnnExpert e;
      e.w1 = uniform_weight({dp, dh}, dp, rng);
      e.b1 = zero_bias(dh);
      e.head = OutputHead(dims, rng);
      return e;
    }
    case ExpertKind::gru: {
      GruExpert e;
      auto& c = e.cell;
      c.w_update = uniform_weight({dp, dh}, dp, rng);
      c.u_update = uniform_weight({dh, dh}, dh, rng);
      c.b_update = zero_bias(dh);
      c.w_reset = uniform_weight({dp, dh}, dp, rng);
      c.u_reset = uniform_weight({dh, dh}, dh, rng);
      c.b_reset = zero_bias(dh);
      c.w_cand = uniform_weight({dp, dh}, dp, rng);
      c.u_cand = uniform_weight({dh, dh}, dh, rng);
      c.b_cand = zero_bias(dh);
      e.head = OutputHead(dims, rng);
      return e;
    }
    case ExpertKind::tcn: {
      TcnExpert e;
      e.conv1_kernel = uniform_weight({TcnExpert::kTaps, dp, dh}, TcnExpert::kTaps * dp, rng);
      e.conv1_bias = zero_bias(dh);
      e.conv2_kernel = uniform_weight({TcnExpert::kTaps, dh, dh}, TcnExpert::kTaps * dh, rng);
      e.conv2_bias = zero_bias(dh);
      if (dp != dh) e.residual = uniform_weight({dp, dh}, dp, rng);
      e.dropout_rate = dims.tcn_dropout;
      e.head = OutputHead(dims, rng);
      return e;
    }
  }
  throw ParameterError("unknown expert kind");
}

ExpertKind kind_of(const Expert& expert) {
  return static_cast<ExpertKind>(expert.index());
}

ExpertOutput expert_forward(const Expert& expert, const Tensor& summary, const Tensor& sequence,
                            std::span<const int> lengths, Phase phase, Rng* rng) {
  return std::visit(
      [&](const auto& e) -> ExpertOutput {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, FfnnExpert>) {
          return e.forward(summary);
        } else if constexpr (std::is_same_v<T, GruExpert>) {
          return e.forward(sequence, lengths);
        } else {
          return e.forward(sequence, lengths, phase, rng);
        }
      },
      expert);
}

void collect_parameters(const Expert& expert, const std::string& prefix, std::vector<Parameter>& out) {
  auto add_head = [&](const OutputHead& h) {
    out.push_back({prefix + ".head.weight", h.weight});
    out.push_back({prefix + ".head.bias", h.bias});
  };
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, FfnnExpert>) {
          out.push_back({prefix + ".w1", e.w1});
          out.push_back({prefix + ".b1", e.b1});
        } else if constexpr (std::is_same_v<T, GruExpert>) {
          const auto& c = e.cell;
          out.push_back({prefix + ".w_update", c.w_update});
          out.push_back({prefix + ".u_update", c.u_update});
          out.push_back({prefix + ".b_update", c.b_update});
          out.push_back({prefix + ".w_reset", c.w_reset});
          out.push_back({prefix + ".u_reset", c.u_reset});
          out.push_back({prefix + ".b_reset", c.b_reset});
          out.push_back({prefix + ".w_cand", c.w_cand});
          out.push_back({prefix + ".u_cand", c.u_cand});
          out.push_back({prefix + ".b_cand", c.b_cand});
        } else {
          out.push_back({prefix + ".conv1.kernel", e.conv1_kernel});
          out.push_back({prefix + ".conv1.bias", e.conv1_bias});
          out.push_back({prefix + ".conv2.kernel", e.conv2_kernel});
          out.push_back({prefix + ".conv2.bias", e.conv2_bias});
          if (e.residual) out.push_back({prefix + ".residual", *e.residual});
        }
        add_head(e.head);
      },
      expert);
}

}  // namespace hecto
