// SPDX-License-Identifier: Apache-2.0
#include "hecto/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "hecto/error.hpp"
#include "hecto/ops.hpp"

namespace hecto {

namespace {

constexpr std::uint64_t kTrainStream = 0xd1b54a32d192ed03ULL;

TokenBatch batch_of(std::span<const Example* const> rows) {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(rows.size());
  for (const Example* e : rows) seqs.push_back(e->tokens);
  return make_token_batch(seqs);
}

void check_dataset(const HectoModel& model, const Dataset& data) {
  if (data.mode != model.mode()) {
    throw ModeError(std::string("dataset is ") + (data.mode == TaskMode::regression ? "regression" : "classification") +
                    " but the model is " + (model.mode() == TaskMode::regression ? "regression" : "classification"));
  }
  validate_dataset(data, model.config().encoder.vocab_size, model.config().encoder.max_len - 1,
                   model.config().dims.num_classes);
}

}  // namespace

void TrainConfig::validate() const {
  optim.validate();
  if (batch_size < 1) throw ParameterError("train.batch_size must be >= 1");
  if (epochs < 1) throw ParameterError("train.epochs must be >= 1");
  if (eval_chunk < 1) throw ParameterError("train.eval_chunk must be >= 1");
  if (loss.lambda_ent < 0.0 || loss.lambda_div < 0.0) throw ParameterError("loss weights must be >= 0");
}

Tensor task_loss(const HectoModel& model, const Tensor& predictions, std::span<const Example* const> batch) {
  if (model.mode() == TaskMode::classification) {
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const Example* e : batch) labels.push_back(e->label());
    return cross_entropy(predictions, labels);
  }
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const Example* e : batch) targets.push_back(e->target);
  return mse(predictions, targets);
}

EvalResult evaluate(const HectoModel& model, const Dataset& data, std::size_t chunk) {
  if (data.empty()) throw DataError("evaluate on an empty dataset");
  if (chunk < 1) throw ParameterError("evaluation chunk must be >= 1");
  check_dataset(model, data);
  const std::size_t n = data.size();
  const std::size_t k = model.num_experts();
  const std::size_t width = model.config().dims.outputs();
  const std::size_t chunks = (n + chunk - 1) / chunk;

  EvalResult out;
  out.experts = k;
  out.decisions.resize(n);
  out.gate.resize(n * k);
  out.predictions.resize(n * width);
  std::vector<std::string> failures(chunks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
    try {
      NoGradGuard no_grad;
      const std::size_t lo = static_cast<std::size_t>(c) * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      std::vector<const Example*> rows;
      for (std::size_t i = lo; i < hi; ++i) rows.push_back(&data.examples[i]);
      auto r = model.forward(batch_of(rows), Phase::eval, nullptr);
      std::copy(r.gate_probs.data().begin(), r.gate_probs.data().end(), out.gate.begin() + static_cast<std::ptrdiff_t>(lo * k));
      std::copy(r.predictions.data().begin(), r.predictions.data().end(),
                out.predictions.begin() + static_cast<std::ptrdiff_t>(lo * width));
      for (std::size_t i = lo; i < hi; ++i) out.decisions[i] = std::move(r.decisions[i - lo]);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(c)] = e.what();
    }
  }
  for (const auto& f : failures) {
    if (!f.empty()) throw NumericError("evaluation failed: " + f);
  }

  if (model.mode() == TaskMode::classification) {
    std::vector<int> predicted(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = out.predictions.data() + i * width;
      predicted[i] = static_cast<int>(std::max_element(row, row + width) - row);
      labels[i] = data.examples[i].label();
    }
    out.metrics = classification_metrics(predicted, labels, width);
  } else {
    std::vector<double> targets(n);
    for (std::size_t i = 0; i < n; ++i) targets[i] = data.examples[i].target;
    out.metrics = regression_metrics(out.predictions, targets);
  }
  return out;
}

EpochRecord summarize(const HectoModel& model, const Dataset& data, const EvalResult& eval) {
  const std::size_t n = data.size();
  const std::size_t k = eval.experts;
  EpochRecord rec;
  rec.metrics = eval.metrics;
  rec.entropy = mean_gate_entropy(eval.gate, k);
  rec.usage = expert_usage(eval.decisions);
  rec.soft_usage = soft_usage(eval.gate, k);

  std::vector<std::size_t> class_of(n);
  std::vector<std::string> classes;
  if (model.mode() == TaskMode::classification) {
    for (std::size_t c = 0; c < model.config().dims.num_classes; ++c) classes.push_back(std::to_string(c));
    for (std::size_t i = 0; i < n; ++i) class_of[i] = static_cast<std::size_t>(data.examples[i].label());
  } else {
    // Regression targets in [0, 5] are grouped into unit-wide bins.
    for (int b = 0; b < 5; ++b) classes.push_back("[" + std::to_string(b) + "," + std::to_string(b + 1) + ")");
    for (std::size_t i = 0; i < n; ++i) {
      const double t = std::clamp(data.examples[i].target, 0.0, 4.999999);
      class_of[i] = static_cast<std::size_t>(std::floor(t));
    }
  }
  rec.by_label = classwise_routing(eval.decisions, eval.gate, k, class_of, classes);

  const bool tagged = std::all_of(data.examples.begin(), data.examples.end(), [](const Example& e) { return e.tag.has_value(); });
  if (tagged) {
    for (std::size_t i = 0; i < n; ++i) class_of[i] = *data.examples[i].tag == SubtaskTag::temporal ? 1 : 0;
    rec.by_tag = classwise_routing(eval.decisions, eval.gate, k, class_of, {"static", "temporal"});
  }
  return rec;
}

std::string parameter_checksum(std::span<const Parameter> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    for (double v : p.value.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
      }
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string encoder_checksum(const HectoModel& model) {
  std::vector<Parameter> params;
  model.encoder().collect_parameters(params);
  return parameter_checksum(params);
}

RunReport train(HectoModel& model, const Dataset& train_set, const Dataset& eval_set, const TrainConfig& config,
                std::uint64_t seed, const EpochHook& hook) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  check_dataset(model, train_set);
  const Dataset& eval_data = eval_set.empty() ? train_set : eval_set;
  if (!eval_set.empty()) check_dataset(model, eval_set);

  model.encoder().set_frozen(config.frozen_encoder);
  Rng rng(seed ^ kTrainStream);
  AdamW optimizer(model.parameters(), config.optim);

  RunReport report;
  report.seed = seed;
  report.model = expert_pool_name(model.config().experts);
  report.routing = std::string(to_string(model.config().gate.policy));
  report.mode = model.mode();
  report.eval_split = eval_set.empty() ? "train" : "holdout";
  report.train_size = train_set.size();
  report.eval_size = eval_data.size();
  report.encoder_checksum_start = encoder_checksum(model);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0, task_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t lo = 0; lo < n; lo += config.batch_size) {
      const std::size_t hi = std::min(n, lo + config.batch_size);
      std::vector<const Example*> rows;
      rows.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) rows.push_back(&train_set.examples[order[i]]);
      const auto result = model.forward(batch_of(rows), Phase::train, &rng);
      const Tensor task = task_loss(model, result.predictions, rows);
      const Tensor loss = total_loss(task, result.gate_probs, config.loss);
      optimizer.zero_grad();
      loss.backward();
      optimizer.step();
      loss_sum += loss.item();
      task_sum += task.item();
      ++steps;
    }
    const auto eval = evaluate(model, eval_data, config.eval_chunk);
    EpochRecord rec = summarize(model, eval_data, eval);
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(steps);
    rec.train_task_loss = task_sum / static_cast<double>(steps);
    if (hook) hook(rec, model);
    report.epochs.push_back(std::move(rec));
  }
  report.encoder_checksum_end = encoder_checksum(model);
  report.parameter_checksum = parameter_checksum(model.parameters());
  return report;
}

}  // namespace hecto
