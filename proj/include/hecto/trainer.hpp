// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hecto/analytics.hpp"
#include "hecto/losses.hpp"
#include "hecto/model.hpp"
#include "hecto/optim.hpp"
#include "hecto/tasks.hpp"

namespace hecto {

struct TrainConfig {
  AdamWConfig optim;
  std::size_t batch_size = 16;
  std::size_t epochs = 5;
  LossWeights loss;
  bool frozen_encoder = false;
  /// Samples per evaluation chunk; chunks are evaluated in parallel.
  std::size_t eval_chunk = 64;

  void validate() const;
};

/// Everything measured on the evaluation split at the end of one epoch.
struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_task_loss = 0.0;
  TaskMetrics metrics;
  GateEntropy entropy;
  ExpertUsage usage;
  std::vector<double> soft_usage;
  ClasswiseRouting by_label;
  /// Present when the evaluation split carries subtask tags.
  std::optional<ClasswiseRouting> by_tag;
  bool operator==(const EpochRecord&) const = default;
};

struct RunReport {
  std::uint64_t seed = 0;
  std::string model;  // expert pool, e.g. "FFNN+GRU"
  std::string routing;
  TaskMode mode = TaskMode::classification;
  std::string eval_split;  // "holdout" or "train"
  std::size_t train_size = 0;
  std::size_t eval_size = 0;
  std::vector<EpochRecord> epochs;
  std::string encoder_checksum_start;
  std::string encoder_checksum_end;
  std::string parameter_checksum;
  bool operator==(const RunReport&) const = default;
};

struct EvalResult {
  TaskMetrics metrics;
  std::vector<RoutingDecision> decisions;
  std::vector<double> gate;  // row-major [n x k]
  std::vector<double> predictions;  // [n x outputs]
  std::size_t experts = 0;
};

/// Eval-phase forward over the dataset in chunks, fanned out across threads
/// and merged in index order. Throws ModeError if the dataset mode differs
/// from the model's.
EvalResult evaluate(const HectoModel& model, const Dataset& data, std::size_t chunk = 64);

/// Routing statistics of an evaluation, labelled by class and, when every
/// example is tagged, by subtask.
EpochRecord summarize(const HectoModel& model, const Dataset& data, const EvalResult& eval);

/// FNV-1a over the raw bytes of every parameter, in registry order, as 16
/// hex digits.
std::string parameter_checksum(std::span<const Parameter> params);
std::string encoder_checksum(const HectoModel& model);

using EpochHook = std::function<void(const EpochRecord&, const HectoModel&)>;

/// Runs epochs x ceil(N / batch) AdamW steps on `train_set`, reshuffling
/// every epoch, and evaluates `eval_set` after each epoch (the training set
/// itself when `eval_set` is empty). Deterministic given seed, config and
/// data.
RunReport train(HectoModel& model, const Dataset& train_set, const Dataset& eval_set, const TrainConfig& config,
                std::uint64_t seed, const EpochHook& hook = {});

/// Task loss of a forward result: cross entropy or MSE by model mode.
Tensor task_loss(const HectoModel& model, const Tensor& predictions, std::span<const Example* const> batch);

}  // namespace hecto
