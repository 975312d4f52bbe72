// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "hecto/analytics.hpp"
#include "hecto/trainer.hpp"

namespace hecto {

enum class ReportFormat { json, csv };

/// Column header of the per-run CSV, one row per (epoch, expert).
inline constexpr const char* kRunCsvHeader =
    "epoch,train_loss,train_task_loss,accuracy,macro_f1,mse,pearson,entropy_nats,entropy_bits,"
    "expert,usage_hard_pct,usage_selected_pct,usage_soft_pct";

/// Column header of the seed-aggregated table (mean +- spread per cell).
inline constexpr const char* kTableCsvHeader = "Dataset,Model,Accuracy / F1,Expert Usage (E0/E1),Entropy,Time (ms)";

nlohmann::ordered_json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
std::string to_csv(const RunReport& report);

/// Writes the report with stable field order; the same report always gives
/// the same bytes. Throws IoError when the path cannot be written.
void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path);

/// Writes `text` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const LatencyProfile& profile);

/// "20.1% / 79.9%" style usage string.
std::string format_usage(const std::vector<double>& fractions);

/// Mean and half-range of a sample.
struct Spread {
  double mean = 0.0;
  double half_range = 0.0;
};
Spread spread_of(const std::vector<double>& values);

/// Classwise trajectory in the epochs-by-classes layout: one row per epoch,
/// one column per class, each cell the mean soft routing percentage to
/// `expert`, averaged over runs.
std::string classwise_csv(const std::vector<RunReport>& runs, std::size_t expert, bool by_tag);

struct TableRow {
  std::string dataset;
  std::vector<RunReport> runs;
  /// Per-run mean latency in milliseconds per sample; may be empty.
  std::vector<double> latency_ms;
};

/// Seed-aggregated rows in the Accuracy / F1, Usage, Entropy, Time layout,
/// using the final epoch of each run.
std::string table_csv(const std::vector<TableRow>& rows);
nlohmann::ordered_json summary_json(const TableRow& row);

}  // namespace hecto
