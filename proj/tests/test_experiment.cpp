// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hecto/error.hpp"
#include "hecto/experiment.hpp"
#include "hecto/report.hpp"
#include "hecto/runner.hpp"

using namespace hecto;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hecto_exp_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig tiny(std::string_view presets = "desk") {
  auto c = resolve_presets(presets);
  c.task.n = 120;
  c.train.epochs = 2;
  c.seeds = {1, 2};
  c.report.latency_samples = 5;
  c.report.latency_repetitions = 1;
  return c;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

}  // namespace

TEST_CASE("paper-main resolves to the published training constants") {
  auto c = resolve_presets("paper-main");
  CHECK(c.train.loss.lambda_ent == 0.05);
  CHECK(c.train.loss.lambda_div == 0.08);
  CHECK(c.model.gate.tau == 1.5);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.epochs == 5);
  CHECK(c.train.optim.learning_rate == 2e-5);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(c.model.gate.policy == RoutingPolicy::hard_top1);
  CHECK(c.model.experts == std::vector<ExpertKind>{ExpertKind::ffnn, ExpertKind::gru});
  CHECK_FALSE(c.train.frozen_encoder);
}

TEST_CASE("every preset resolves to a valid config") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    auto c = resolve_presets(name);
    CHECK_NOTHROW(c.validate());
  }
  auto dims = resolve_presets("paper-dims");
  CHECK(dims.model.encoder.d_embed == 768);
  CHECK(dims.model.dims.d_proj == 256);
  CHECK(dims.model.dims.d_hid == 128);
  CHECK(dims.train.optim.learning_rate == 2e-5);

  auto desk = resolve_presets("desk");
  CHECK(desk.train.optim.learning_rate == 1e-3);
  CHECK(desk.train.epochs == 15);
}

TEST_CASE("ablation deltas") {
  auto noreg = resolve_presets("paper-main,no-reg");
  CHECK(noreg.train.loss.lambda_ent == 0.0);
  CHECK(noreg.train.loss.lambda_div == 0.0);
  CHECK(noreg.model.gate.tau == 1.5);

  CHECK(resolve_presets("frozen").train.frozen_encoder);
  CHECK(resolve_presets("frozen").model.encoder.frozen);
  CHECK(resolve_presets("top2").model.gate.policy == RoutingPolicy::top2);
  CHECK(resolve_presets("soft-routing").model.gate.policy == RoutingPolicy::soft);
  CHECK(resolve_presets("gate-mean").model.gate.input == GateInput::mean_pool);
  CHECK(resolve_presets("batch-64").train.batch_size == 64);
  CHECK(resolve_presets("experts-1").model.experts.size() == 1);
  CHECK(resolve_presets("experts-2").model.experts.size() == 2);
  CHECK(resolve_presets("experts-4").model.experts ==
        std::vector<ExpertKind>{ExpertKind::ffnn, ExpertKind::ffnn, ExpertKind::gru, ExpertKind::gru});
  CHECK(resolve_presets("hecto-x").model.experts == std::vector<ExpertKind>{ExpertKind::ffnn, ExpertKind::tcn});
  auto reg = resolve_presets("regressor");
  CHECK(reg.model.dims.mode == TaskMode::regression);
  CHECK(reg.task.name == "regression");

  CHECK_THROWS_AS(resolve_presets("bogus"), UsageError);
  CHECK_THROWS_AS(resolve_presets("desk,paper-main"), UsageError);
  CHECK(resolve_presets("top2,batch-64").preset.find("batch-64") != std::string::npos);
}

TEST_CASE("overrides beat presets and show up in the echo") {
  auto c = resolve_presets("paper-main");
  apply_override(c, "loss.lambda_ent=0.2");
  apply_override(c, "train.epochs", "7");
  apply_override(c, "model.experts=gru,tcn");
  CHECK(c.train.loss.lambda_ent == 0.2);
  CHECK(c.train.epochs == 7);
  auto ini = to_ini(c);
  CHECK(ini.find("lambda_ent = 0.2") != std::string::npos);
  CHECK(ini.find("epochs = 7") != std::string::npos);
  CHECK(ini.find("experts = gru,tcn") != std::string::npos);

  CHECK_THROWS_AS(apply_override(c, "loss.lambda_bogus=1"), UsageError);
  CHECK_THROWS_AS(apply_override(c, "train.epochs=abc"), UsageError);
  CHECK_THROWS_AS(apply_override(c, "gate.policy=top3"), UsageError);
  CHECK_THROWS_AS(apply_override(c, "no_equals_sign"), UsageError);
}

TEST_CASE("ini round trip") {
  for (const auto& name : preset_names()) {
    auto c = resolve_presets(name);
    apply_override(c, "gate.tau=0.1");
    apply_override(c, "train.learning_rate=3.3e-5");
    auto text = to_ini(c);
    CHECK(to_ini(parse_ini(text)) == text);
    CHECK(parse_ini(text).model.gate.tau == 0.1);
    CHECK(parse_ini(text).train.optim.learning_rate == 3.3e-5);
  }
  CHECK_THROWS_AS(parse_ini("[train]\nbogus = 1\n"), UsageError);
  CHECK_THROWS_AS(parse_ini("[nowhere]\nepochs = 1\n"), UsageError);
  CHECK(parse_ini("[train]\nepochs = 3\n").train.epochs == 3);
  CHECK(parse_ini("").train.epochs == resolve_presets("desk").train.epochs);
}

TEST_CASE("missing dataset file is a usage error") {
  auto c = resolve_presets("desk");
  c.task.dataset = "/nonexistent/data.jsonl";
  CHECK_THROWS_AS(load_task_data(c), UsageError);
}

TEST_CASE("checkpoint round trip reproduces predictions") {
  auto c = tiny();
  HectoModel model(c.model, 5);
  auto path = scratch("ckpt.json");
  save_checkpoint(model, c, path);
  auto loaded = load_checkpoint(path);
  CHECK(to_ini(loaded.config) == to_ini(c));
  CHECK(parameter_checksum(loaded.model.parameters()) == parameter_checksum(model.parameters()));
  auto data = gen_mixed(40, 0.5, 3);
  CHECK(evaluate(loaded.model, data).predictions == evaluate(model, data).predictions);
  CHECK_THROWS_AS(load_checkpoint(scratch("absent.json")), IoError);
  fs::remove(path);
}

TEST_CASE("report emission is stable and round trips") {
  auto split = holdout_split(gen_mixed(100, 0.5, 1), 0.2, 1);
  HectoModel model(ModelConfig{}, 1);
  TrainConfig tc;
  tc.epochs = 2;
  auto report = train(model, split.train, split.test, tc, 1);

  auto dir = scratch("emit");
  fs::create_directories(dir);
  emit_report(report, ReportFormat::json, dir / "a.json");
  emit_report(report, ReportFormat::json, dir / "b.json");
  CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
  emit_report(report, ReportFormat::csv, dir / "a.csv");
  emit_report(report, ReportFormat::csv, dir / "b.csv");
  CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));

  auto back = report_from_json(nlohmann::json::parse(read_file(dir / "a.json")));
  CHECK(back == report);

  auto csv = read_file(dir / "a.csv");
  CHECK(first_line(csv) == kRunCsvHeader);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 2);

  CHECK_THROWS_AS(emit_report(report, ReportFormat::json, "/proc/hecto/forbidden.json"), IoError);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"seed", "x"}}), DataError);
  fs::remove_all(dir);
}

TEST_CASE("aggregate table and classwise layouts") {
  auto c = tiny();
  auto dir = scratch("run");
  auto result = run_experiment(c, dir);
  REQUIRE(result.runs.size() == 2);
  for (auto f : {"config.ini", "summary.json", "table.csv", "classwise_label_e0.csv", "classwise_tag_e1.csv",
                 "seed-1/report.json", "seed-1/report.csv", "seed-1/timing.json", "seed-2/model.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / f));
  }
  auto table = read_file(dir / "table.csv");
  CHECK(first_line(table) == kTableCsvHeader);
  CHECK(table.find("+-") != std::string::npos);
  auto tag = read_file(dir / "classwise_tag_e1.csv");
  CHECK(first_line(tag) == "Epoch,static (%),temporal (%)");
  CHECK(std::count(tag.begin(), tag.end(), '\n') == 3);

  auto spread = spread_of({0.8, 0.9, 1.0});
  CHECK(spread.mean == doctest::Approx(0.9));
  CHECK(spread.half_range == doctest::Approx(0.1));

  auto again = scratch("run2");
  run_experiment(parse_ini(read_file(dir / "config.ini")), again);
  // table.csv carries wall-clock latency and is left out.
  for (auto f : {"seed-1/report.json", "seed-2/report.csv", "seed-1/model.json", "classwise_tag_e0.csv"}) {
    CAPTURE(f);
    CHECK(read_file(dir / f) == read_file(again / f));
  }
  auto agg = scratch("agg");
  auto text = aggregate_runs({dir}, agg);
  CHECK(first_line(text) == kTableCsvHeader);
  CHECK(fs::exists(agg / "table.csv"));
  fs::remove_all(dir);
  fs::remove_all(again);
  fs::remove_all(agg);
}
