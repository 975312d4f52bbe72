// SPDX-License-Identifier: Apache-2.0
#include "hecto/model.hpp"

#include <algorithm>
#include <cmath>

#include "hecto/error.hpp"
#include "hecto/ops.hpp"

namespace hecto {

namespace {

Affine make_affine(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& x : w) x = rng.uniform(-bound, bound);
  return {Tensor::from({in, out}, std::move(w), true), Tensor::zeros({out}, true)};
}

Tensor apply(const Affine& a, const Tensor& x) { return add_bias(matmul(x, a.weight), a.bias); }

constexpr double kProbTolerance = 1e-9;

Encoder make_encoder(const EncoderConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return Encoder(config, rng);
}

}  // namespace

std::string_view to_string(GateInput v) { return v == GateInput::summary ? "summary" : "mean_pool"; }

std::string_view to_string(RoutingPolicy v) {
  switch (v) {
    case RoutingPolicy::hard_top1:
      return "hard_top1";
    case RoutingPolicy::top2:
      return "top2";
    case RoutingPolicy::soft:
      return "soft";
  }
  return "?";
}

GateInput parse_gate_input(std::string_view name) {
  if (name == "summary" || name == "cls") return GateInput::summary;
  if (name == "mean_pool" || name == "mean") return GateInput::mean_pool;
  throw ParameterError("unknown gate input '" + std::string(name) + "'");
}

RoutingPolicy parse_routing_policy(std::string_view name) {
  if (name == "hard_top1" || name == "top1") return RoutingPolicy::hard_top1;
  if (name == "top2") return RoutingPolicy::top2;
  if (name == "soft") return RoutingPolicy::soft;
  throw ParameterError("unknown routing policy '" + std::string(name) + "'");
}

void GateConfig::validate(std::size_t num_experts) const {
  if (num_experts < 1) throw ParameterError("expert pool must not be empty");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ParameterError("gate.tau must be positive");
  if (policy == RoutingPolicy::top2 && num_experts < 2) throw ParameterError("top2 routing needs at least 2 experts");
  if (d_hidden < 1) throw ParameterError("gate.d_hidden must be >= 1");
}

void ModelConfig::validate() const {
  encoder.validate();
  gate.validate(experts.size());
  if (dims.d_proj < 1 || dims.d_hid < 1) throw ParameterError("model dimensions must be >= 1");
  if (dims.mode == TaskMode::classification && dims.num_classes < 2) {
    throw ParameterError("classification needs at least 2 classes");
  }
  if (dims.tcn_dropout < 0.0 || dims.tcn_dropout >= 1.0) throw ParameterError("tcn dropout must be in [0, 1)");
}

std::string expert_pool_name(std::span<const ExpertKind> experts) {
  std::string s;
  for (std::size_t i = 0; i < experts.size(); ++i) {
    if (i) s += "+";
    std::string n(to_string(experts[i]));
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    s += n;
  }
  return s;
}

RoutingDecision route(std::span<const double> probs, RoutingPolicy policy, Phase phase, Rng* rng) {
  const std::size_t k = probs.size();
  if (k == 0) throw NumericError("route: empty gate vector");
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw NumericError("route: gate probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbTolerance) {
    throw NumericError("route: gate probabilities sum to " + std::to_string(total));
  }
  RoutingDecision d;
  d.probs.assign(probs.begin(), probs.end());
  d.weights.assign(k, 0.0);
  switch (policy) {
    case RoutingPolicy::hard_top1: {
      std::size_t s = 0;
      if (phase == Phase::train) {
        if (rng == nullptr) throw ContractError("route: training-mode sampling needs a random source");
        const double u = rng->uniform() * total;
        double acc = 0.0;
        s = k;
        for (std::size_t j = 0; j < k; ++j) {
          acc += probs[j];
          if (u < acc) {
            s = j;
            break;
          }
        }
        if (s == k) {
          // u landed past the accumulated mass through rounding; take the last live expert
          s = k - 1;
          while (s > 0 && probs[s] == 0.0) --s;
        }
      } else {
        s = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      }
      d.selected = {s};
      d.weights[s] = 1.0;
      break;
    }
    case RoutingPolicy::top2: {
      if (k < 2) throw ParameterError("top2 routing needs at least 2 experts");
      std::vector<std::size_t> order(k);
      for (std::size_t j = 0; j < k; ++j) order[j] = j;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
      d.selected = {std::min(order[0], order[1]), std::max(order[0], order[1])};
      const double mass = probs[d.selected[0]] + probs[d.selected[1]];
      for (auto j : d.selected) d.weights[j] = probs[j] / mass;
      break;
    }
    case RoutingPolicy::soft: {
      d.selected.resize(k);
      for (std::size_t j = 0; j < k; ++j) d.selected[j] = j;
      d.weights.assign(probs.begin(), probs.end());
      break;
    }
  }
  return d;
}

Tensor straight_through(const Tensor& probs, std::span<const double> hard, std::span<const double> reference) {
  if (hard.size() != probs.size() || reference.size() != probs.size()) {
    throw DimensionError("straight_through: buffers do not match " + shape_string(probs.shape()));
  }
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hard[i] + (probs[i] - reference[i]);
  return Tensor::make_result("straight_through", probs.shape(), std::move(out), {probs}, [](Node& self) {
    auto& G = self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) G->grad[i] += self.grad[i];
  });
}

Tensor renormalize_selected(const Tensor& probs, const std::vector<std::vector<std::size_t>>& selected) {
  if (probs.rank() != 2 || selected.size() != probs.dim(0)) {
    throw DimensionError("renormalize_selected: selection does not match " + shape_string(probs.shape()));
  }
  const std::size_t b = probs.dim(0);
  const std::size_t k = probs.dim(1);
  std::vector<double> out(b * k, 0.0);
  std::vector<double> mass(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (auto j : selected[i]) mass[i] += probs[i * k + j];
    for (auto j : selected[i]) out[i * k + j] = probs[i * k + j] / mass[i];
  }
  return Tensor::make_result("renormalize_selected", probs.shape(), std::move(out), {probs},
                             [selected, mass = std::move(mass), k](Node& self) {
                               auto& G = self.inputs[0];
                               for (std::size_t i = 0; i < selected.size(); ++i) {
                                 double dot = 0.0;
                                 for (auto j : selected[i]) dot += self.grad[i * k + j] * self.data[i * k + j];
                                 for (auto j : selected[i]) G->grad[i * k + j] += (self.grad[i * k + j] - dot) / mass[i];
                               }
                             });
}

Tensor mixture_combine(const std::vector<Tensor>& outputs, const std::vector<std::vector<std::size_t>>& rows,
                       const Tensor& mix, std::size_t batch, std::size_t width) {
  const std::size_t k = outputs.size();
  if (rows.size() != k || mix.rank() != 2 || mix.dim(0) != batch || mix.dim(1) != k) {
    throw DimensionError("mixture_combine: mixture " + shape_string(mix.shape()) + " for " + std::to_string(k) +
                         " experts and batch " + std::to_string(batch));
  }
  std::vector<double> out(batch * width, 0.0);
  std::vector<Tensor> inputs{mix};
  for (std::size_t e = 0; e < k; ++e) {
    if (rows[e].empty()) continue;
    const auto& o = outputs[e];
    if (o.rank() != 2 || o.dim(0) != rows[e].size() || o.dim(1) != width) {
      throw DimensionError("mixture_combine: expert output " + shape_string(o.shape()));
    }
    for (std::size_t r = 0; r < rows[e].size(); ++r) {
      const std::size_t i = rows[e][r];
      const double w = mix[i * k + e];
      for (std::size_t c = 0; c < width; ++c) out[i * width + c] += w * o[r * width + c];
    }
  }
  // Input slot e + 1 holds expert e's output; empty experts get a placeholder.
  std::vector<std::uint8_t> present(k, 0);
  for (std::size_t e = 0; e < k; ++e) {
    present[e] = rows[e].empty() ? 0 : 1;
    inputs.push_back(rows[e].empty() ? Tensor::zeros({0, width}) : outputs[e]);
  }
  return Tensor::make_result(
      "mixture_combine", {batch, width}, std::move(out), std::move(inputs),
      [rows, present = std::move(present), k, width](Node& self) {
        auto& M = self.inputs[0];
        for (std::size_t e = 0; e < k; ++e) {
          if (!present[e]) continue;
          auto& O = self.inputs[e + 1];
          for (std::size_t r = 0; r < rows[e].size(); ++r) {
            const std::size_t i = rows[e][r];
            const double* g = self.grad.data() + i * width;
            if (M->requires_grad) {
              double dot = 0.0;
              for (std::size_t c = 0; c < width; ++c) dot += g[c] * O->data[r * width + c];
              M->grad[i * k + e] += dot;
            }
            if (O->requires_grad) {
              const double w = M->data[i * k + e];
              for (std::size_t c = 0; c < width; ++c) O->grad[r * width + c] += w * g[c];
            }
          }
        }
      });
}

HectoModel::HectoModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), encoder_(make_encoder(config.encoder, seed)) {
  config_.validate();
  // The encoder consumed its own stream above; everything else draws from a
  // second stream derived from the same seed.
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto d_embed = config_.encoder.d_embed;
  const auto d_proj = config_.dims.d_proj;
  summary_proj_ = make_affine(d_embed, d_proj, rng);
  sequence_proj_ = make_affine(d_embed, d_proj, rng);
  gate_.hidden = make_affine(d_proj, config_.gate.d_hidden, rng);
  gate_.output = make_affine(config_.gate.d_hidden, config_.experts.size(), rng);
  for (auto kind : config_.experts) experts_.push_back(make_expert(kind, config_.dims, rng));
}

Tensor HectoModel::project_summary(const Tensor& encoded) const {
  return relu(apply(summary_proj_, time_step(encoded, 0)));
}

Tensor HectoModel::project_sequence(const Tensor& encoded) const {
  return apply(sequence_proj_, slice_steps(encoded, 1, encoded.dim(1)));
}

Tensor HectoModel::gate_input(const Tensor& encoded, const Tensor& summary, std::span<const int> lengths) const {
  if (config_.gate.input == GateInput::summary) return summary;
  Tensor pooled = masked_mean_steps(slice_steps(encoded, 1, encoded.dim(1)), lengths);
  return relu(apply(summary_proj_, pooled));
}

Tensor HectoModel::gate_forward(const Tensor& gate_in) const {
  Tensor hidden = relu(apply(gate_.hidden, gate_in));
  return softmax_temperature(apply(gate_.output, hidden), config_.gate.tau);
}

ForwardResult HectoModel::forward(const TokenBatch& batch, Phase phase, Rng* rng,
                                  const std::vector<RoutingDecision>* fixed) const {
  const std::size_t b = batch.batch;
  if (b == 0) throw DataError("forward on an empty batch");
  const std::size_t k = experts_.size();
  const auto policy = config_.gate.policy;

  Tensor encoded = encoder_.encode(batch);
  Tensor z = project_summary(encoded);
  Tensor seq = project_sequence(encoded);
  Tensor g = gate_forward(gate_input(encoded, z, batch.lengths));

  ForwardResult result;
  result.gate_probs = g;
  result.decisions.reserve(b);
  if (fixed != nullptr && fixed->size() != b) throw DimensionError("fixed routing does not match batch size");
  for (std::size_t i = 0; i < b; ++i) {
    std::span<const double> row(g.data().data() + i * k, k);
    if (fixed == nullptr) {
      result.decisions.push_back(route(row, policy, phase, rng));
    } else {
      RoutingDecision d = (*fixed)[i];
      if (policy != RoutingPolicy::hard_top1) {
        // top2 and soft weights are functions of the current g over the fixed selection.
        d.probs.assign(row.begin(), row.end());
        d.weights.assign(k, 0.0);
        double mass = 0.0;
        for (auto e : d.selected) mass += row[e];
        for (auto e : d.selected) d.weights[e] = policy == RoutingPolicy::soft ? row[e] : row[e] / mass;
      }
      result.decisions.push_back(std::move(d));
    }
  }

  std::vector<std::vector<std::size_t>> rows(k);
  std::vector<std::vector<std::size_t>> selected(b);
  for (std::size_t i = 0; i < b; ++i) {
    selected[i] = result.decisions[i].selected;
    for (auto e : selected[i]) {
      if (e >= k) throw DimensionError("routing selected expert " + std::to_string(e));
      rows[e].push_back(i);
    }
  }

  Tensor mix;
  switch (policy) {
    case RoutingPolicy::hard_top1: {
      std::vector<double> hard(b * k, 0.0);
      std::vector<double> reference(b * k);
      for (std::size_t i = 0; i < b; ++i) {
        hard[i * k + selected[i].front()] = 1.0;
        const auto& ref = result.decisions[i].probs;
        std::copy(ref.begin(), ref.end(), reference.begin() + static_cast<std::ptrdiff_t>(i * k));
      }
      mix = phase == Phase::train ? straight_through(g, hard, reference) : Tensor::from({b, k}, std::move(hard));
      break;
    }
    case RoutingPolicy::top2:
      mix = renormalize_selected(g, selected);
      break;
    case RoutingPolicy::soft:
      mix = g;
      break;
  }

  const std::size_t width = config_.dims.outputs();
  std::vector<Tensor> outputs(k);
  result.expert_calls.assign(k, 0);
  for (std::size_t e = 0; e < k; ++e) {
    if (rows[e].empty()) continue;
    std::vector<int> lengths(rows[e].size());
    for (std::size_t r = 0; r < rows[e].size(); ++r) lengths[r] = batch.lengths[rows[e][r]];
    const bool everyone = rows[e].size() == b;
    Tensor z_e = everyone ? z : gather_rows(z, rows[e]);
    Tensor seq_e = everyone ? seq : gather_rows(seq, rows[e]);
    outputs[e] = expert_forward(experts_[e], z_e, seq_e, lengths, phase, rng).output;
    result.expert_calls[e] = rows[e].size();
  }
  result.predictions = mixture_combine(outputs, rows, mix, b, width);
  return result;
}

std::vector<Parameter> HectoModel::parameters() const {
  std::vector<Parameter> out;
  encoder_.collect_parameters(out);
  out.push_back({"projection.summary.weight", summary_proj_.weight});
  out.push_back({"projection.summary.bias", summary_proj_.bias});
  out.push_back({"projection.sequence.weight", sequence_proj_.weight});
  out.push_back({"projection.sequence.bias", sequence_proj_.bias});
  out.push_back({"gate.hidden.weight", gate_.hidden.weight});
  out.push_back({"gate.hidden.bias", gate_.hidden.bias});
  out.push_back({"gate.output.weight", gate_.output.weight});
  out.push_back({"gate.output.bias", gate_.output.bias});
  for (std::size_t e = 0; e < experts_.size(); ++e) {
    collect_parameters(experts_[e], "experts." + std::to_string(e) + "." + std::string(to_string(kind_of(experts_[e]))), out);
  }
  return out;
}

std::vector<Parameter> HectoModel::expert_parameters(std::size_t k) const {
  std::vector<Parameter> out;
  collect_parameters(experts_.at(k), "experts." + std::to_string(k) + "." + std::string(to_string(kind_of(experts_[k]))), out);
  return out;
}

}  // namespace hecto
