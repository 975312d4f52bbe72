// SPDX-License-Identifier: Apache-2.0
// Command line front end: gen-data, train, eval, report.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hecto/error.hpp"
#include "hecto/experiment.hpp"
#include "hecto/report.hpp"
#include "hecto/runner.hpp"
#include "hecto/tasks.hpp"

namespace {

using namespace hecto;

constexpr int kUsageExit = 2;
constexpr int kRuntimeExit = 1;

int gen_data(const std::string& task, std::size_t n, std::uint64_t seed, double ratio, const std::string& out) {
  const Dataset data = generate(task, n, seed, ratio);
  if (out.empty() || out == "-") {
    std::cout << to_jsonl(data);
  } else {
    save_jsonl(data, out);
    std::cerr << "wrote " << data.size() << " examples to " << out << "\n";
  }
  return 0;
}

int train_cmd(const std::string& preset, const std::string& config_path, const std::vector<std::string>& overrides,
              const std::vector<std::uint64_t>& seeds, const std::string& dataset, const std::string& out) {
  ExperimentConfig config = config_path.empty() ? resolve_presets(preset.empty() ? "desk" : preset) : load_ini(config_path);
  for (const auto& o : overrides) apply_override(config, o);
  if (!seeds.empty()) config.seeds = seeds;
  if (!dataset.empty()) config.task.dataset = dataset;
  try {
    config.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  std::cerr << "config:\n" << to_ini(config) << "\n";
  const auto result = run_experiment(config, out);
  for (const auto& run : result.runs) {
    const auto& last = run.report.epochs.back();
    std::fprintf(stderr, "seed %llu: ", static_cast<unsigned long long>(run.report.seed));
    if (last.metrics.mode == TaskMode::classification) {
      std::fprintf(stderr, "accuracy %.4f macro-F1 %.4f", last.metrics.accuracy, last.metrics.macro_f1);
    } else {
      std::fprintf(stderr, "MSE %.4f pearson %s", last.metrics.mse,
                   last.metrics.pearson ? std::to_string(*last.metrics.pearson).c_str() : "undefined");
    }
    std::fprintf(stderr, " entropy %.4f bits usage %s latency %.4f ms\n", last.entropy.bits,
                 format_usage(last.usage.partition).c_str(), run.latency.overall_ms);
  }
  if (!out.empty()) std::cout << read_file(std::filesystem::path(out) / "table.csv");
  return 0;
}

int eval_cmd(const std::string& model_path, const std::string& dataset_path) {
  if (!std::filesystem::exists(model_path)) throw IoError("model " + model_path + " does not exist");
  const Checkpoint ck = load_checkpoint(model_path);
  const Dataset data =
      load_jsonl(dataset_path, ck.config.model.dims.mode, ck.config.model.encoder.vocab_size);
  if (data.empty()) throw DataError("dataset " + dataset_path + " is empty");
  const auto eval = evaluate(ck.model, data, ck.config.train.eval_chunk);
  const EpochRecord rec = summarize(ck.model, data, eval);
  nlohmann::ordered_json j;
  j["model"] = expert_pool_name(ck.config.model.experts);
  j["samples"] = data.size();
  if (rec.metrics.mode == TaskMode::classification) {
    j["accuracy"] = rec.metrics.accuracy;
    j["macro_f1"] = rec.metrics.macro_f1;
  } else {
    j["mse"] = rec.metrics.mse;
    j["pearson"] = rec.metrics.pearson ? nlohmann::ordered_json(*rec.metrics.pearson) : nlohmann::ordered_json(nullptr);
  }
  j["entropy_nats"] = rec.entropy.nats;
  j["entropy_bits"] = rec.entropy.bits;
  j["usage_hard"] = rec.usage.partition;
  j["usage_soft"] = rec.soft_usage;
  j["usage"] = format_usage(rec.usage.partition);
  j["classwise_label"] = {{"classes", rec.by_label.classes}, {"soft", rec.by_label.soft}};
  if (rec.by_tag) j["classwise_tag"] = {{"classes", rec.by_tag->classes}, {"soft", rec.by_tag->soft}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int report_cmd(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  std::cout << aggregate_runs(paths, out.empty() ? paths.front() : std::filesystem::path(out));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous sparse mixture-of-experts experiments"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic JSONL dataset");
  std::string task;
  std::size_t n = 1000;
  std::uint64_t gen_seed = 7;
  double ratio = 0.5;
  std::string gen_out;
  gen->add_option("task", task, "static, temporal, mixed or regression")->required();
  gen->add_option("n", n, "number of examples")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--ratio", ratio, "static share for the mixed task");
  gen->add_option("--out", gen_out, "output path (stdout when omitted)");

  auto* tr = app.add_subcommand("train", "Train every seed of an experiment");
  std::string preset, config_path, dataset, train_out;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  auto* preset_opt = tr->add_option("--preset", preset, "comma separated presets, e.g. desk,no-reg");
  tr->add_option("--config", config_path, "INI configuration file")->excludes(preset_opt);
  tr->add_option("--set", overrides, "override section.key=value (repeatable)");
  tr->add_option("--seed", seeds, "replace the seed list (repeatable)");
  tr->add_option("--dataset", dataset, "JSONL dataset instead of a generator");
  tr->add_option("--out", train_out, "run directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a JSONL dataset");
  std::string model_path, eval_data;
  ev->add_option("--model", model_path, "checkpoint (model.json)")->required();
  ev->add_option("--dataset", eval_data, "JSONL dataset")->required();

  auto* rp = app.add_subcommand("report", "Aggregate run directories into the summary tables");
  std::vector<std::string> run_dirs;
  std::string report_out;
  rp->add_option("runs", run_dirs, "run directories")->required();
  rp->add_option("--out", report_out, "output directory (defaults to the first run directory)");

  auto* presets = app.add_subcommand("presets", "List preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  try {
    if (*gen) return gen_data(task, n, gen_seed, ratio, gen_out);
    if (*tr) return train_cmd(preset, config_path, overrides, seeds, dataset, train_out);
    if (*ev) return eval_cmd(model_path, eval_data);
    if (*rp) return report_cmd(run_dirs, report_out);
    if (*presets) {
      for (const auto& name : preset_names()) std::cout << name << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return kUsageExit;
}
