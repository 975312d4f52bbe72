// SPDX-License-Identifier: Apache-2.0
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "hecto/report.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "hecto_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(HECTO_CLI) + " " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  ~Workspace() { fs::remove_all(kWork); }
};

}  // namespace

TEST_CASE("gen-data") {
  Workspace ws;
  auto a = kWork / "a.jsonl", b = kWork / "b.jsonl";
  CHECK(run("gen-data static 1000 --seed 3 --out " + a.string()) == 0);
  CHECK(run("gen-data static 1000 --seed 3 --out " + b.string()) == 0);
  CHECK(lines(a) == 1000);
  CHECK(slurp(a) == slurp(b));
  CHECK(run("gen-data nonsense 10") == 2);
  CHECK(run("gen-data") == 2);
}

TEST_CASE("train, eval and report") {
  Workspace ws;
  auto out = kWork / "run";
  const std::string base = "train --preset desk --set task.n=120 --set train.epochs=2 --set report.latency_samples=4 ";
  REQUIRE(run(base + "--set loss.lambda_div=0.3 --seed 5 --out " + out.string()) == 0);
  auto ini = slurp(out / "config.ini");
  CHECK(ini.find("lambda_div = 0.3") != std::string::npos);
  CHECK(ini.find("seeds = 5") != std::string::npos);
  CHECK(fs::exists(out / "seed-5" / "report.json"));
  auto table = slurp(out / "table.csv");
  CHECK(table.substr(0, table.find('\n')) == hecto::kTableCsvHeader);

  auto rerun = kWork / "rerun";
  REQUIRE(run("train --config " + (out / "config.ini").string() + " --out " + rerun.string()) == 0);
  CHECK(slurp(out / "seed-5" / "report.json") == slurp(rerun / "seed-5" / "report.json"));
  CHECK(slurp(out / "seed-5" / "model.json") == slurp(rerun / "seed-5" / "model.json"));

  auto data = kWork / "eval.jsonl";
  REQUIRE(run("gen-data mixed 50 --out " + data.string()) == 0);
  CHECK(run("eval --model " + (out / "seed-5" / "model.json").string() + " --dataset " + data.string()) == 0);
  CHECK(slurp(kWork / "stdout.txt").find("\"accuracy\"") != std::string::npos);

  std::ofstream(kWork / "empty.jsonl").close();
  CHECK(run("eval --model " + (out / "seed-5" / "model.json").string() + " --dataset " +
            (kWork / "empty.jsonl").string()) == 1);
  CHECK(run("eval --model " + (kWork / "none.json").string() + " --dataset " + data.string()) == 1);

  CHECK(run("report " + out.string() + " --out " + (kWork / "agg").string()) == 0);
  CHECK(fs::exists(kWork / "agg" / "table.csv"));
  CHECK(run("report " + (kWork / "missing").string()) == 1);
}

TEST_CASE("usage errors exit with 2") {
  Workspace ws;
  auto out = (kWork / "x").string();
  CHECK(run("train --preset nope --out " + out) == 2);
  CHECK(run("train --preset desk --set train.bogus=1 --out " + out) == 2);
  CHECK(run("train --preset desk --set train.epochs=0 --out " + out) == 2);
  CHECK(run("train --preset desk --dataset /nonexistent.jsonl --out " + out) == 2);
  CHECK(run("train --preset desk") == 2);
  CHECK(run("frobnicate") == 2);
}
