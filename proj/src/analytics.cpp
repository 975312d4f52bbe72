// SPDX-License-Identifier: Apache-2.0
#include "hecto/analytics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>

#include "hecto/error.hpp"

namespace hecto {

namespace {

void check_gate(std::span<const double> gate, std::size_t k) {
  if (k == 0 || gate.size() % k != 0) throw DimensionError("gate buffer is not a multiple of " + std::to_string(k));
}

}  // namespace

ExpertUsage expert_usage(std::span<const RoutingDecision> decisions) {
  if (decisions.empty()) throw DataError("expert_usage on an empty decision list");
  const std::size_t k = decisions.front().probs.size();
  ExpertUsage u;
  u.selected.assign(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  std::size_t total = 0;
  for (const auto& d : decisions) {
    for (auto e : d.selected) {
      if (e >= k) throw DimensionError("decision selects expert " + std::to_string(e));
      ++counts[e];
      ++total;
    }
  }
  u.partition.assign(k, 0.0);
  const auto n = static_cast<double>(decisions.size());
  for (std::size_t e = 0; e < k; ++e) {
    u.selected[e] = static_cast<double>(counts[e]) / n;
    u.partition[e] = static_cast<double>(counts[e]) / static_cast<double>(total);
  }
  return u;
}

std::vector<double> soft_usage(std::span<const double> gate, std::size_t k) {
  check_gate(gate, k);
  const std::size_t n = gate.size() / k;
  if (n == 0) throw DataError("soft_usage on an empty gate matrix");
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < k; ++e) out[e] += gate[i * k + e];
  }
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

GateEntropy mean_gate_entropy(std::span<const double> gate, std::size_t k) {
  check_gate(gate, k);
  const std::size_t n = gate.size() / k;
  if (n == 0) throw DataError("mean_gate_entropy on an empty gate matrix");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0, h = 0.0;
    for (std::size_t e = 0; e < k; ++e) {
      const double p = gate[i * k + e];
      row_sum += p;
      if (p > 0.0) h -= p * std::log(p);
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ContractError("gate row " + std::to_string(i) + " sums to " + std::to_string(row_sum));
    }
    total += h;
  }
  GateEntropy out;
  out.nats = total / static_cast<double>(n);
  out.bits = out.nats / std::numbers::ln2;
  return out;
}

ClasswiseRouting classwise_routing(std::span<const RoutingDecision> decisions, std::span<const double> gate,
                                   std::size_t k, std::span<const std::size_t> class_of,
                                   std::vector<std::string> classes) {
  check_gate(gate, k);
  const std::size_t n = gate.size() / k;
  if (decisions.size() != n || class_of.size() != n) {
    throw DataError("classwise routing inputs are not aligned: " + std::to_string(decisions.size()) +
                    " decisions, " + std::to_string(n) + " gate rows, " + std::to_string(class_of.size()) +
                    " labels");
  }
  ClasswiseRouting out;
  const std::size_t c = classes.size();
  out.classes = std::move(classes);
  out.counts.assign(c, 0);
  out.soft.assign(c, std::vector<double>(k, 0.0));
  out.hard.assign(c, std::vector<double>(k, 0.0));
  std::vector<std::size_t> picks(c, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cls = class_of[i];
    if (cls >= c) throw DataError("sample " + std::to_string(i) + " has class index " + std::to_string(cls));
    ++out.counts[cls];
    for (std::size_t e = 0; e < k; ++e) out.soft[cls][e] += gate[i * k + e];
    for (auto e : decisions[i].selected) {
      out.hard[cls][e] += 1.0;
      ++picks[cls];
    }
  }
  for (std::size_t cls = 0; cls < c; ++cls) {
    if (out.counts[cls] == 0) continue;
    for (std::size_t e = 0; e < k; ++e) {
      out.soft[cls][e] /= static_cast<double>(out.counts[cls]);
      out.hard[cls][e] /= static_cast<double>(picks[cls]);
    }
  }
  return out;
}

TaskMetrics classification_metrics(std::span<const int> predicted, std::span<const int> labels,
                                   std::size_t num_classes) {
  if (predicted.empty()) throw DataError("classification metrics on an empty set");
  if (predicted.size() != labels.size()) throw DimensionError("predictions and labels differ in length");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], y = labels[i];
    if (p < 0 || y < 0 || static_cast<std::size_t>(p) >= num_classes || static_cast<std::size_t>(y) >= num_classes) {
      throw DataError("class index outside [0, " + std::to_string(num_classes) + ")");
    }
    if (p == y) {
      ++correct;
      ++tp[static_cast<std::size_t>(p)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(y)];
    }
  }
  TaskMetrics m;
  m.mode = TaskMode::classification;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(predicted.size());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom > 0) f1_sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  m.macro_f1 = f1_sum / static_cast<double>(num_classes);
  return m;
}

std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("pearson_r inputs differ in length");
  if (x.empty()) throw DataError("pearson_r on an empty set");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

TaskMetrics regression_metrics(std::span<const double> predicted, std::span<const double> targets) {
  if (predicted.empty()) throw DataError("regression metrics on an empty set");
  if (predicted.size() != targets.size()) throw DimensionError("predictions and targets differ in length");
  TaskMetrics m;
  m.mode = TaskMode::regression;
  double se = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) se += (predicted[i] - targets[i]) * (predicted[i] - targets[i]);
  m.mse = se / static_cast<double>(predicted.size());
  m.pearson = pearson_r(predicted, targets);
  return m;
}

LatencyProfile latency_profile(const HectoModel& model, const Dataset& data, std::size_t repetitions,
                               std::size_t max_samples) {
  if (repetitions == 0) throw ParameterError("latency_profile needs at least one repetition");
  if (data.empty()) throw DataError("latency_profile on an empty dataset");
  const std::size_t n = max_samples == 0 ? data.size() : std::min(max_samples, data.size());
  NoGradGuard no_grad;
  using clock = std::chrono::steady_clock;
  std::map<std::string, std::pair<std::size_t, double>> paths;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<int>> one{data.examples[i].tokens};
    const TokenBatch batch = make_token_batch(one);
    const auto warm = model.forward(batch, Phase::eval, nullptr);
    std::string name;
    for (auto e : warm.decisions.front().selected) name += (name.empty() ? "E" : "+E") + std::to_string(e);
    const auto start = clock::now();
    for (std::size_t r = 0; r < repetitions; ++r) (void)model.forward(batch, Phase::eval, nullptr);
    const double ms =
        std::chrono::duration<double, std::milli>(clock::now() - start).count() / static_cast<double>(repetitions);
    auto& slot = paths[name];
    ++slot.first;
    slot.second += ms;
    total += ms;
  }
  LatencyProfile out;
  out.samples = n;
  out.repetitions = repetitions;
  out.overall_ms = total / static_cast<double>(n);
  for (const auto& [name, slot] : paths) {
    out.paths.push_back({name, slot.first, slot.second / static_cast<double>(slot.first)});
  }
  return out;
}

}  // namespace hecto
