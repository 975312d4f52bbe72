// SPDX-License-Identifier: Apache-2.0
#include "hecto/runner.hpp"

#include <algorithm>

#include "hecto/error.hpp"
#include "hecto/report.hpp"

namespace hecto {

namespace {

namespace fs = std::filesystem;

void write_aggregates(const std::vector<RunReport>& reports, const std::vector<TableRow>& rows,
                      const fs::path& out_dir) {
  nlohmann::ordered_json summary;
  summary["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : rows) summary["rows"].push_back(summary_json(row));
  write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
  write_file_atomic(out_dir / "table.csv", table_csv(rows));
  const std::size_t k = reports.front().epochs.front().soft_usage.size();
  for (std::size_t e = 0; e < k; ++e) {
    write_file_atomic(out_dir / ("classwise_label_e" + std::to_string(e) + ".csv"), classwise_csv(reports, e, false));
    if (reports.front().epochs.front().by_tag) {
      write_file_atomic(out_dir / ("classwise_tag_e" + std::to_string(e) + ".csv"), classwise_csv(reports, e, true));
    }
  }
}

}  // namespace

std::string dataset_label(const ExperimentConfig& config) {
  return config.task.dataset.empty() ? config.task.name : fs::path(config.task.dataset).stem().string();
}

ExperimentResult run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  const Dataset data = load_task_data(config);
  if (data.empty()) throw DataError("dataset is empty");
  validate_dataset(data, config.model.encoder.vocab_size, config.model.encoder.max_len - 1,
                   config.model.dims.num_classes);
  const Split split = holdout_split(data, config.task.holdout, config.task.data_seed);
  if (split.train.empty()) throw DataError("holdout leaves no training data");

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file_atomic(out_dir / "config.ini", to_ini(config));
  }

  const std::size_t s = config.seeds.size();
  std::vector<std::optional<HectoModel>> models(s);
  std::vector<RunReport> reports(s);
  std::vector<std::string> failures(s);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(s); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      models[idx].emplace(config.model, config.seeds[idx]);
      reports[idx] = train(*models[idx], split.train, split.test, config.train, config.seeds[idx]);
    } catch (const std::exception& e) {
      failures[idx] = e.what();
    }
  }
  for (std::size_t i = 0; i < s; ++i) {
    if (!failures[i].empty()) throw NumericError("seed " + std::to_string(config.seeds[i]) + ": " + failures[i]);
  }

  ExperimentResult result;
  result.dataset = dataset_label(config);
  const Dataset& probe = split.test.empty() ? split.train : split.test;
  TableRow row{result.dataset, reports, {}};
  for (std::size_t i = 0; i < s; ++i) {
    SeedRun run{reports[i], latency_profile(*models[i], probe, config.report.latency_repetitions,
                                            config.report.latency_samples)};
    row.latency_ms.push_back(run.latency.overall_ms);
    if (!out_dir.empty()) {
      const fs::path dir = out_dir / ("seed-" + std::to_string(config.seeds[i]));
      fs::create_directories(dir);
      emit_report(run.report, ReportFormat::json, dir / "report.json");
      emit_report(run.report, ReportFormat::csv, dir / "report.csv");
      write_file_atomic(dir / "timing.json", to_json(run.latency).dump(2) + "\n");
      save_checkpoint(*models[i], config, dir / "model.json");
    }
    result.runs.push_back(std::move(run));
  }
  if (!out_dir.empty()) write_aggregates(reports, {row}, out_dir);
  return result;
}

std::string aggregate_runs(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  if (run_dirs.empty()) throw UsageError("report needs at least one run directory");
  std::vector<TableRow> rows;
  std::vector<RunReport> first_reports;
  for (const auto& dir : run_dirs) {
    if (!fs::is_directory(dir)) throw IoError("run directory " + dir.string() + " does not exist");
    const ExperimentConfig config = load_ini(dir / "config.ini");
    TableRow row{dataset_label(config), {}, {}};
    bool all_timed = true;
    std::vector<double> latency;
    for (auto seed : config.seeds) {
      const fs::path seed_dir = dir / ("seed-" + std::to_string(seed));
      row.runs.push_back(report_from_json(nlohmann::json::parse(read_file(seed_dir / "report.json"))));
      if (fs::exists(seed_dir / "timing.json")) {
        latency.push_back(nlohmann::json::parse(read_file(seed_dir / "timing.json")).at("overall_ms").get<double>());
      } else {
        all_timed = false;
      }
    }
    if (all_timed) row.latency_ms = latency;
    if (rows.empty()) first_reports = row.runs;
    rows.push_back(std::move(row));
  }
  fs::create_directories(out_dir);
  write_aggregates(first_reports, rows, out_dir);
  return table_csv(rows);
}

}  // namespace hecto
