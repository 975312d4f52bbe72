// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hecto/model.hpp"
#include "hecto/tasks.hpp"

namespace hecto {

struct ExpertUsage {
  /// Fraction of samples whose selected set contains each expert. Sums to 1
  /// under Top-1, to 2 under Top-2.
  std::vector<double> selected;
  /// `selected` normalized to sum 1.
  std::vector<double> partition;
  bool operator==(const ExpertUsage&) const = default;
};

ExpertUsage expert_usage(std::span<const RoutingDecision> decisions);

/// Column means of a row-major [n x k] gate matrix.
std::vector<double> soft_usage(std::span<const double> gate, std::size_t k);

struct GateEntropy {
  double nats = 0.0;
  double bits = 0.0;
  bool operator==(const GateEntropy&) const = default;
};

/// Mean row entropy of a row-major [n x k] gate matrix; bits = nats / ln 2.
/// Throws ContractError if a row does not sum to 1 within 1e-6.
GateEntropy mean_gate_entropy(std::span<const double> gate, std::size_t k);

/// Per-class routing table. Rows follow `classes`; a class without samples
/// has count 0 and all-zero rows.
struct ClasswiseRouting {
  std::vector<std::string> classes;
  std::vector<std::size_t> counts;
  /// Mean soft gate probability per expert.
  std::vector<std::vector<double>> soft;
  /// Fraction of the class's samples whose selection contains each expert,
  /// normalized per row.
  std::vector<std::vector<double>> hard;
  bool operator==(const ClasswiseRouting&) const = default;
};

/// `class_of[i]` indexes `classes` for sample i. Throws DataError when the
/// decisions, gate rows and class indices are not aligned.
ClasswiseRouting classwise_routing(std::span<const RoutingDecision> decisions, std::span<const double> gate,
                                   std::size_t k, std::span<const std::size_t> class_of,
                                   std::vector<std::string> classes);

struct TaskMetrics {
  TaskMode mode = TaskMode::classification;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double mse = 0.0;
  /// Absent when either side has zero variance.
  std::optional<double> pearson;
  bool operator==(const TaskMetrics&) const = default;
};

/// Per-class F1 averaged without weights over classes 0..num_classes-1. A
/// class with no true and no predicted samples contributes 0.
TaskMetrics classification_metrics(std::span<const int> predicted, std::span<const int> labels,
                                   std::size_t num_classes);
TaskMetrics regression_metrics(std::span<const double> predicted, std::span<const double> targets);
std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y);

struct LatencyPath {
  std::string name;  // e.g. "E1", or "E0+E1" for multi-expert routes
  std::size_t samples = 0;
  double mean_ms = 0.0;
};

struct LatencyProfile {
  double overall_ms = 0.0;
  std::size_t samples = 0;
  std::size_t repetitions = 0;
  std::vector<LatencyPath> paths;  // sorted by name
};

/// Wall-clock of single-sample eval forwards. Each sample is run once
/// untimed, then `repetitions` timed runs are averaged. At most `max_samples`
/// examples are profiled (0 = all).
LatencyProfile latency_profile(const HectoModel& model, const Dataset& data, std::size_t repetitions,
                               std::size_t max_samples = 0);

}  // namespace hecto
