// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hecto/model.hpp"
#include "hecto/tasks.hpp"
#include "hecto/trainer.hpp"

namespace hecto {

struct TaskConfig {
  /// static, temporal, mixed or regression; ignored when `dataset` is set.
  std::string name = "mixed";
  std::size_t n = 2000;
  double ratio = 0.5;
  std::uint64_t data_seed = 7;
  double holdout = 0.2;
  /// Optional JSONL file used instead of a generator.
  std::string dataset;
};

struct ReportConfig {
  std::size_t latency_repetitions = 3;
  std::size_t latency_samples = 200;
};

/// Fully resolved experiment. Text form is INI; see `to_ini` for the schema.
struct ExperimentConfig {
  std::string preset = "desk";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  TaskConfig task;
  ModelConfig model;
  TrainConfig train;
  ReportConfig report;

  /// Throws ParameterError on inconsistent settings.
  void validate() const;
};

/// Named presets. Base presets (desk, paper-main, paper-dims) set the whole
/// configuration; every other preset is a delta applied on top.
std::vector<std::string> preset_names();
bool is_base_preset(std::string_view name);

/// Resolves a comma separated preset list such as "paper-main,no-reg". A
/// list without a base preset starts from desk. Unknown names raise
/// UsageError.
ExperimentConfig resolve_presets(std::string_view list);

/// Applies "section.key=value". Unknown keys and bad values raise UsageError.
void apply_override(ExperimentConfig& config, std::string_view assignment);
void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Canonical INI text with every key present; parse_ini(to_ini(c)) == c.
std::string to_ini(const ExperimentConfig& config);
/// Keys missing from the text keep their desk defaults. Unknown sections or
/// keys raise UsageError.
ExperimentConfig parse_ini(std::string_view text);
ExperimentConfig load_ini(const std::filesystem::path& path);

/// Generated or loaded data for the experiment, before the holdout split.
Dataset load_task_data(const ExperimentConfig& config);

/// Checkpoint container: the resolved config plus every registry entry as a
/// named flat array with its shape, in one JSON document.
void save_checkpoint(const HectoModel& model, const ExperimentConfig& config, const std::filesystem::path& path);

struct Checkpoint {
  ExperimentConfig config;
  HectoModel model;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hecto
