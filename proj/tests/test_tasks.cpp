// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "hecto/error.hpp"
#include "hecto/rng.hpp"
#include "hecto/tasks.hpp"

using namespace hecto;

namespace {

// Majority-count classifier. Sees the token multiset only.
int multiset_oracle(const std::vector<int>& tokens) {
  int a = 0, b = 0;
  for (int t : tokens) {
    if (t >= 2 && t <= 7) ++a;
    if (t >= 8 && t <= 13) ++b;
  }
  return a > b ? 0 : 1;
}

// Reference for the ordering rule, written against raw ids.
int order_oracle(const std::vector<int>& tokens) {
  std::size_t pa = tokens.size(), pb = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == 14 && pa == tokens.size()) pa = i;
    if (tokens[i] == 15 && pb == tokens.size()) pb = i;
  }
  return pa < pb ? 1 : 0;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hecto_tasks_" + name);
}

}  // namespace

TEST_CASE("static label is the majority group and ignores order") {
  CHECK(static_label({2, 2, 2, 2, 2, 8}) == 0);
  CHECK(static_label({2, 3, 8}) == 0);
  CHECK(static_label({8, 9, 2}) == 1);
  CHECK(static_label({2, 8, 8, 13, 7}) == 1);

  auto data = gen_static(1000, 11);
  REQUIRE(data.size() == 1000);
  Rng rng(5);
  int correct = 0;
  for (const auto& e : data.examples) {
    CHECK(e.tokens.size() >= 6);
    CHECK(e.tokens.size() <= 23);
    for (int t : e.tokens) CHECK((vocab::in_group_a(t) || vocab::in_group_b(t)));
    int a = static_cast<int>(std::count_if(e.tokens.begin(), e.tokens.end(), vocab::in_group_a));
    CHECK(2 * a != static_cast<int>(e.tokens.size()));
    CHECK(e.label() == static_label(e.tokens));
    auto shuffled = e.tokens;
    rng.shuffle(shuffled);
    CHECK(static_label(shuffled) == e.label());
    correct += multiset_oracle(e.tokens) == e.label() ? 1 : 0;
  }
  CHECK(correct == 1000);
}

TEST_CASE("temporal label follows marker order") {
  const int x = 20;
  CHECK(temporal_label({14, x, 15}) == 1);
  CHECK(temporal_label({15, x, 14}) == 0);
  CHECK(temporal_label({x, 14, 15, x}) == 1);
  CHECK_THROWS_AS(temporal_label({x, 14, x}), DataError);

  auto data = gen_temporal(1000, 3);
  int ones = 0;
  for (const auto& e : data.examples) {
    CHECK(e.tokens.size() >= 6);
    CHECK(e.tokens.size() <= 16);
    CHECK(std::count(e.tokens.begin(), e.tokens.end(), 14) == 1);
    CHECK(std::count(e.tokens.begin(), e.tokens.end(), 15) == 1);
    for (int t : e.tokens) CHECK((t == 14 || t == 15 || vocab::is_filler(t)));
    CHECK(e.label() == order_oracle(e.tokens));
    auto swapped = e.tokens;
    for (int& t : swapped) t = t == 14 ? 15 : t == 15 ? 14 : t;
    CHECK(temporal_label(swapped) == 1 - e.label());
    ones += e.label();
  }
  CHECK(ones > 450);
  CHECK(ones < 550);
}

TEST_CASE("every marker multiset is balanced, so order-blind classifiers sit at chance") {
  // Exhaustive over lengths 4..6 and both marker positions with one fixed
  // filler pattern: each multiset meets label 0 and label 1 equally often.
  for (int len = 4; len <= 6; ++len) {
    std::map<std::vector<int>, std::pair<int, int>> by_multiset;
    for (int pa = 0; pa < len; ++pa) {
      for (int pb = 0; pb < len; ++pb) {
        if (pa == pb) continue;
        std::vector<int> seq(static_cast<std::size_t>(len), 16);
        seq[static_cast<std::size_t>(pa)] = 14;
        seq[static_cast<std::size_t>(pb)] = 15;
        auto key = seq;
        std::sort(key.begin(), key.end());
        auto& counts = by_multiset[key];
        (temporal_label(seq) == 1 ? counts.second : counts.first)++;
      }
    }
    for (const auto& [key, counts] : by_multiset) CHECK(counts.first == counts.second);
  }
}

TEST_CASE("mixed task keeps the vocabulary partition and tags") {
  auto data = gen_mixed(1000, 0.5, 9);
  REQUIRE(data.size() == 1000);
  int n_static = 0, static_ok = 0, n_temporal = 0, temporal_ok = 0;
  for (const auto& e : data.examples) {
    REQUIRE(e.tag.has_value());
    CHECK(e.tokens.size() >= 6);
    CHECK(e.tokens.size() <= 16);
    if (*e.tag == SubtaskTag::static_reasoning) {
      ++n_static;
      for (int t : e.tokens) CHECK((vocab::in_group_a(t) || vocab::in_group_b(t)));
      static_ok += multiset_oracle(e.tokens) == e.label() ? 1 : 0;
    } else {
      ++n_temporal;
      for (int t : e.tokens) CHECK((t == 14 || t == 15 || vocab::is_filler(t)));
      temporal_ok += multiset_oracle(e.tokens) == e.label() ? 1 : 0;
    }
  }
  CHECK(n_static == 500);
  CHECK(n_temporal == 500);
  CHECK(static_ok == 500);
  double temporal_acc = temporal_ok / 500.0;
  CHECK(temporal_acc >= 0.47);
  CHECK(temporal_acc <= 0.53);

  CHECK(gen_mixed(10, 0.3, 1).examples.size() == 10);
  int s = 0;
  for (const auto& e : gen_mixed(10, 0.3, 1).examples) s += *e.tag == SubtaskTag::static_reasoning ? 1 : 0;
  CHECK(s == 3);
}

TEST_CASE("regression target is the scaled marker position") {
  const int f = 17;
  CHECK(regression_target({14, f, f, f, f, f}) == 0.0);
  CHECK(regression_target({f, f, f, f, f, 14}) == 5.0);
  CHECK(regression_target({f, f, f, f, 14, f, f, f, f, f, f}) == 2.0);

  auto data = gen_regression(500, 4);
  CHECK(data.mode == TaskMode::regression);
  for (const auto& e : data.examples) {
    CHECK(std::count(e.tokens.begin(), e.tokens.end(), 14) == 1);
    CHECK(e.target >= 0.0);
    CHECK(e.target <= 5.0);
    CHECK(e.target == regression_target(e.tokens));
  }
}

TEST_CASE("generators are deterministic per seed") {
  for (auto name : kTaskNames) {
    CHECK(generate(name, 200, 42) == generate(name, 200, 42));
    CHECK_FALSE(generate(name, 200, 42) == generate(name, 200, 43));
  }
  CHECK_THROWS_AS(generate("nope", 10, 1), UsageError);
}

TEST_CASE("jsonl round trip") {
  for (auto name : kTaskNames) {
    auto data = generate(name, 100, 8);
    auto back = parse_jsonl(to_jsonl(data), data.mode);
    CHECK(back == data);
  }
  auto path = temp_file("rt.jsonl");
  auto data = gen_mixed(50, 0.5, 2);
  save_jsonl(data, path);
  CHECK(load_jsonl(path, TaskMode::classification) == data);
  std::filesystem::remove(path);
}

TEST_CASE("jsonl errors carry line numbers") {
  CHECK(parse_jsonl("", TaskMode::classification).empty());
  CHECK(parse_jsonl("\n\n", TaskMode::classification).empty());

  auto line_of = [](std::string_view text, TaskMode mode = TaskMode::classification) -> std::size_t {
    try {
      parse_jsonl(text, mode);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string ok = R"({"tokens":[2,3],"target":0})";
  CHECK(line_of(ok + "\n{bad json\n") == 2);
  CHECK(line_of(ok + "\n" + ok + "\n" + R"({"tokens":[40],"target":0})") == 3);
  CHECK(line_of(R"({"tokens":[-1],"target":0})") == 1);
  CHECK(line_of(R"({"tokens":[],"target":0})") == 1);
  CHECK(line_of(R"({"target":0})") == 1);
  CHECK(line_of(R"({"tokens":[2]})") == 1);
  CHECK(line_of(R"({"tokens":[2],"target":0.5})") == 1);
  CHECK(line_of(R"({"tokens":[2],"target":0,"extra":1})") == 1);
  CHECK(line_of(R"({"tokens":[2],"target":0,"tag":"other"})") == 1);
  CHECK(line_of(R"({"tokens":[2],"target":0.5})", TaskMode::regression) == 0);

  CHECK_THROWS_AS(load_jsonl(temp_file("missing.jsonl"), TaskMode::classification), IoError);
}

TEST_CASE("dataset validation") {
  auto data = gen_static(20, 1);
  CHECK_NOTHROW(validate_dataset(data, 32, 23, 2));
  CHECK_THROWS_AS(validate_dataset(data, 32, 5, 2), DataError);
  data.examples[0].target = 3;
  CHECK_THROWS(validate_dataset(data, 32, 23, 2));
}

TEST_CASE("holdout split is a seeded partition") {
  auto data = gen_static(100, 3);
  auto split = holdout_split(data, 0.2, 5);
  CHECK(split.test.size() == 20);
  CHECK(split.train.size() == 80);
  CHECK(split.train.mode == data.mode);
  std::multiset<std::vector<int>> all, parts;
  for (const auto& e : data.examples) all.insert(e.tokens);
  for (const auto& e : split.train.examples) parts.insert(e.tokens);
  for (const auto& e : split.test.examples) parts.insert(e.tokens);
  CHECK(all == parts);
  auto again = holdout_split(data, 0.2, 5);
  CHECK(again.train == split.train);
  CHECK(again.test == split.test);
  CHECK(holdout_split(data, 0.0, 5).test.empty());
}
