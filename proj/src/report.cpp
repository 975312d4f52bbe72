// SPDX-License-Identifier: Apache-2.0
#include "hecto/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hecto/error.hpp"

namespace hecto {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

ordered_json metrics_json(const TaskMetrics& m) {
  ordered_json j;
  j["mode"] = m.mode == TaskMode::classification ? "classification" : "regression";
  if (m.mode == TaskMode::classification) {
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
  } else {
    j["mse"] = m.mse;
    j["pearson"] = m.pearson ? json(*m.pearson) : json(nullptr);
  }
  return j;
}

TaskMetrics metrics_from(const json& j) {
  TaskMetrics m;
  m.mode = j.at("mode").get<std::string>() == "regression" ? TaskMode::regression : TaskMode::classification;
  if (m.mode == TaskMode::classification) {
    m.accuracy = j.at("accuracy").get<double>();
    m.macro_f1 = j.at("macro_f1").get<double>();
  } else {
    m.mse = j.at("mse").get<double>();
    if (!j.at("pearson").is_null()) m.pearson = j.at("pearson").get<double>();
  }
  return m;
}

ordered_json classwise_json(const ClasswiseRouting& c) {
  ordered_json j;
  j["classes"] = c.classes;
  j["counts"] = c.counts;
  j["soft"] = c.soft;
  j["hard"] = c.hard;
  return j;
}

ClasswiseRouting classwise_from(const json& j) {
  ClasswiseRouting c;
  c.classes = j.at("classes").get<std::vector<std::string>>();
  c.counts = j.at("counts").get<std::vector<std::size_t>>();
  c.soft = j.at("soft").get<std::vector<std::vector<double>>>();
  c.hard = j.at("hard").get<std::vector<std::vector<double>>>();
  return c;
}

const EpochRecord& final_epoch(const RunReport& r) {
  if (r.epochs.empty()) throw DataError("run report for seed " + std::to_string(r.seed) + " has no epochs");
  return r.epochs.back();
}

}  // namespace

ordered_json to_json(const RunReport& r) {
  ordered_json j;
  j["seed"] = r.seed;
  j["model"] = r.model;
  j["routing"] = r.routing;
  j["mode"] = r.mode == TaskMode::classification ? "classification" : "regression";
  j["eval_split"] = r.eval_split;
  j["train_size"] = r.train_size;
  j["eval_size"] = r.eval_size;
  ordered_json epochs = ordered_json::array();
  for (const auto& e : r.epochs) {
    ordered_json je;
    je["epoch"] = e.epoch;
    je["train_loss"] = e.train_loss;
    je["train_task_loss"] = e.train_task_loss;
    je["metrics"] = metrics_json(e.metrics);
    je["entropy_nats"] = e.entropy.nats;
    je["entropy_bits"] = e.entropy.bits;
    je["usage_hard"] = e.usage.partition;
    je["usage_selected"] = e.usage.selected;
    je["usage_soft"] = e.soft_usage;
    je["classwise_label"] = classwise_json(e.by_label);
    je["classwise_tag"] = e.by_tag ? classwise_json(*e.by_tag) : ordered_json(nullptr);
    epochs.push_back(std::move(je));
  }
  j["epochs"] = std::move(epochs);
  j["encoder_checksum_start"] = r.encoder_checksum_start;
  j["encoder_checksum_end"] = r.encoder_checksum_end;
  j["parameter_checksum"] = r.parameter_checksum;
  return j;
}

RunReport report_from_json(const json& j) {
  try {
    RunReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.model = j.at("model").get<std::string>();
    r.routing = j.at("routing").get<std::string>();
    r.mode = j.at("mode").get<std::string>() == "regression" ? TaskMode::regression : TaskMode::classification;
    r.eval_split = j.at("eval_split").get<std::string>();
    r.train_size = j.at("train_size").get<std::size_t>();
    r.eval_size = j.at("eval_size").get<std::size_t>();
    for (const auto& je : j.at("epochs")) {
      EpochRecord e;
      e.epoch = je.at("epoch").get<std::size_t>();
      e.train_loss = je.at("train_loss").get<double>();
      e.train_task_loss = je.at("train_task_loss").get<double>();
      e.metrics = metrics_from(je.at("metrics"));
      e.entropy = {je.at("entropy_nats").get<double>(), je.at("entropy_bits").get<double>()};
      e.usage.partition = je.at("usage_hard").get<std::vector<double>>();
      e.usage.selected = je.at("usage_selected").get<std::vector<double>>();
      e.soft_usage = je.at("usage_soft").get<std::vector<double>>();
      e.by_label = classwise_from(je.at("classwise_label"));
      if (!je.at("classwise_tag").is_null()) e.by_tag = classwise_from(je.at("classwise_tag"));
      r.epochs.push_back(std::move(e));
    }
    r.encoder_checksum_start = j.at("encoder_checksum_start").get<std::string>();
    r.encoder_checksum_end = j.at("encoder_checksum_end").get<std::string>();
    r.parameter_checksum = j.at("parameter_checksum").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run report: ") + e.what());
  }
}

std::string to_csv(const RunReport& r) {
  std::string out = kRunCsvHeader;
  out += '\n';
  for (const auto& e : r.epochs) {
    const bool cls = e.metrics.mode == TaskMode::classification;
    for (std::size_t k = 0; k < e.usage.partition.size(); ++k) {
      out += std::to_string(e.epoch) + ',' + num(e.train_loss) + ',' + num(e.train_task_loss) + ',';
      out += (cls ? num(e.metrics.accuracy) : "") + ',' + (cls ? num(e.metrics.macro_f1) : "") + ',';
      out += (cls ? "" : num(e.metrics.mse)) + ',';
      out += (cls ? "" : (e.metrics.pearson ? num(*e.metrics.pearson) : "undefined")) + ',';
      out += num(e.entropy.nats) + ',' + num(e.entropy.bits) + ',' + std::to_string(k) + ',';
      out += num(100.0 * e.usage.partition[k]) + ',' + num(100.0 * e.usage.selected[k]) + ',' +
             num(100.0 * e.soft_usage[k]) + '\n';
    }
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("failed writing " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path) {
  write_file_atomic(path, format == ReportFormat::json ? to_json(report).dump(2) + "\n" : to_csv(report));
}

ordered_json to_json(const LatencyProfile& p) {
  ordered_json j;
  j["overall_ms"] = p.overall_ms;
  j["samples"] = p.samples;
  j["repetitions"] = p.repetitions;
  ordered_json paths = ordered_json::array();
  for (const auto& path : p.paths) {
    ordered_json jp;
    jp["path"] = path.name;
    jp["samples"] = path.samples;
    jp["mean_ms"] = path.mean_ms;
    paths.push_back(std::move(jp));
  }
  j["paths"] = std::move(paths);
  return j;
}

std::string format_usage(const std::vector<double>& fractions) {
  std::string out;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    if (k) out += " / ";
    out += fixed(100.0 * fractions[k], 1) + "%";
  }
  return out;
}

Spread spread_of(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {sum / static_cast<double>(values.size()), (*hi - *lo) / 2.0};
}

std::string classwise_csv(const std::vector<RunReport>& runs, std::size_t expert, bool by_tag) {
  if (runs.empty()) throw DataError("classwise table needs at least one run");
  const auto pick = [&](const EpochRecord& e) -> const ClasswiseRouting& {
    if (by_tag && !e.by_tag) throw DataError("runs carry no subtask tags");
    return by_tag ? *e.by_tag : e.by_label;
  };
  const auto& first = pick(runs.front().epochs.front());
  std::string out = "Epoch";
  for (const auto& c : first.classes) out += "," + c + " (%)";
  out += '\n';
  const std::size_t epochs = runs.front().epochs.size();
  for (std::size_t ep = 0; ep < epochs; ++ep) {
    out += std::to_string(ep + 1);
    for (std::size_t c = 0; c < first.classes.size(); ++c) {
      double sum = 0.0;
      for (const auto& r : runs) {
        if (r.epochs.size() != epochs) throw DataError("runs differ in epoch count");
        const auto& table = pick(r.epochs[ep]);
        if (expert >= table.soft[c].size()) throw DataError("expert index outside the pool");
        sum += table.soft[c][expert];
      }
      out += "," + fixed(100.0 * sum / static_cast<double>(runs.size()), 2);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::string pm(const Spread& s, int digits, double scale = 1.0) {
  return fixed(scale * s.mean, digits) + " +- " + fixed(scale * s.half_range, digits);
}

}  // namespace

ordered_json summary_json(const TableRow& row) {
  if (row.runs.empty()) throw DataError("summary needs at least one run");
  const auto& r0 = row.runs.front();
  const std::size_t k = final_epoch(r0).usage.partition.size();
  std::vector<double> acc, f1, mse, pearson, ent_n, ent_b;
  std::vector<std::vector<double>> usage(k), soft(k);
  for (const auto& r : row.runs) {
    const auto& e = final_epoch(r);
    acc.push_back(e.metrics.accuracy);
    f1.push_back(e.metrics.macro_f1);
    mse.push_back(e.metrics.mse);
    if (e.metrics.pearson) pearson.push_back(*e.metrics.pearson);
    ent_n.push_back(e.entropy.nats);
    ent_b.push_back(e.entropy.bits);
    for (std::size_t j = 0; j < k; ++j) {
      usage[j].push_back(e.usage.partition.at(j));
      soft[j].push_back(e.soft_usage.at(j));
    }
  }
  auto sj = [](const std::vector<double>& v) {
    const auto s = spread_of(v);
    ordered_json j;
    j["mean"] = s.mean;
    j["half_range"] = s.half_range;
    j["values"] = v;
    return j;
  };
  ordered_json j;
  j["dataset"] = row.dataset;
  j["model"] = r0.model;
  j["routing"] = r0.routing;
  j["mode"] = r0.mode == TaskMode::classification ? "classification" : "regression";
  ordered_json seeds = ordered_json::array();
  for (const auto& r : row.runs) seeds.push_back(r.seed);
  j["seeds"] = seeds;
  if (r0.mode == TaskMode::classification) {
    j["accuracy"] = sj(acc);
    j["macro_f1"] = sj(f1);
  } else {
    j["mse"] = sj(mse);
    j["pearson"] = pearson.size() == row.runs.size() ? sj(pearson) : ordered_json(nullptr);
  }
  j["entropy_nats"] = sj(ent_n);
  j["entropy_bits"] = sj(ent_b);
  ordered_json ju = ordered_json::array(), js = ordered_json::array();
  for (std::size_t e = 0; e < k; ++e) {
    ju.push_back(sj(usage[e]));
    js.push_back(sj(soft[e]));
  }
  j["usage_hard"] = ju;
  j["usage_soft"] = js;
  j["latency_ms"] = row.latency_ms.empty() ? ordered_json(nullptr) : sj(row.latency_ms);
  return j;
}

std::string table_csv(const std::vector<TableRow>& rows) {
  std::string out = kTableCsvHeader;
  out += '\n';
  for (const auto& row : rows) {
    if (row.runs.empty()) throw DataError("table row '" + row.dataset + "' has no runs");
    const auto& r0 = row.runs.front();
    const std::size_t k = final_epoch(r0).usage.partition.size();
    std::vector<double> a, b, ent;
    std::vector<double> usage(k, 0.0);
    for (const auto& r : row.runs) {
      const auto& e = final_epoch(r);
      if (e.metrics.mode == TaskMode::classification) {
        a.push_back(e.metrics.accuracy);
        b.push_back(e.metrics.macro_f1);
      } else {
        a.push_back(e.metrics.mse);
        if (e.metrics.pearson) b.push_back(*e.metrics.pearson);
      }
      ent.push_back(e.entropy.bits);
      for (std::size_t j = 0; j < k; ++j) usage[j] += e.usage.partition.at(j) / static_cast<double>(row.runs.size());
    }
    std::string metric;
    if (r0.mode == TaskMode::classification) {
      metric = pm(spread_of(a), 2, 100.0) + " / " + pm(spread_of(b), 2, 100.0);
    } else {
      metric = "MSE " + pm(spread_of(a), 4) + " / r " + (b.size() == a.size() ? pm(spread_of(b), 4) : "undefined");
    }
    const std::string time = row.latency_ms.empty() ? "" : pm(spread_of(row.latency_ms), 4);
    out += row.dataset + "," + r0.model + "," + metric + "," + format_usage(usage) + "," + pm(spread_of(ent), 4) +
           " bits," + time + "\n";
  }
  return out;
}

}  // namespace hecto
