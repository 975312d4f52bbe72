// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hecto/analytics.hpp"
#include "hecto/experiment.hpp"
#include "hecto/trainer.hpp"

namespace hecto {

struct SeedRun {
  RunReport report;
  LatencyProfile latency;
};

struct ExperimentResult {
  std::string dataset;
  std::vector<SeedRun> runs;
};

/// Trains every seed of the experiment. Seeds run as independent parallel
/// runs; latency is profiled afterwards, one run at a time. When `out_dir` is
/// non-empty the run tree is written there:
///
///   config.ini                       resolved configuration echo
///   seed-<s>/report.json, report.csv per-seed run report
///   seed-<s>/timing.json             latency profile (not deterministic)
///   seed-<s>/model.json              checkpoint
///   summary.json, table.csv         seed aggregate
///   classwise_<label|tag>_e<k>.csv   routing trajectory to expert k
ExperimentResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir = {});

/// Re-aggregates one or more run directories into `out_dir`: table.csv and
/// summary.json with one row per directory, plus the classwise CSVs of the
/// first directory. Returns the table text.
std::string aggregate_runs(const std::vector<std::filesystem::path>& run_dirs, const std::filesystem::path& out_dir);

/// Name shown in the Dataset column: the task name or the JSONL file stem.
std::string dataset_label(const ExperimentConfig& config);

}  // namespace hecto
