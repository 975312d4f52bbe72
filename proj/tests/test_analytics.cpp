// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "hecto/analytics.hpp"
#include "hecto/error.hpp"
#include "hecto/report.hpp"
#include "hecto/rng.hpp"

using namespace hecto;

namespace {

RoutingDecision pick(std::vector<std::size_t> selected, std::size_t k = 2) {
  RoutingDecision d;
  d.probs.assign(k, 1.0 / static_cast<double>(k));
  d.weights.assign(k, 0.0);
  for (auto s : selected) d.weights[s] = 1.0 / static_cast<double>(selected.size());
  d.selected = std::move(selected);
  return d;
}

}  // namespace

TEST_CASE("expert usage examples") {
  std::vector<RoutingDecision> all_one{pick({1}), pick({1}), pick({1})};
  auto u = expert_usage(all_one);
  CHECK(u.selected == std::vector<double>{0.0, 1.0});
  CHECK(u.partition == std::vector<double>{0.0, 1.0});

  std::vector<RoutingDecision> three_of_four{pick({1}), pick({0}), pick({1}), pick({1})};
  u = expert_usage(three_of_four);
  CHECK(u.selected == std::vector<double>{0.25, 0.75});

  std::vector<RoutingDecision> top2{pick({0, 1}, 3), pick({1, 2}, 3)};
  u = expert_usage(top2);
  CHECK(u.selected == std::vector<double>{0.5, 1.0, 0.5});
  CHECK(u.partition == std::vector<double>{0.25, 0.5, 0.25});

  CHECK_THROWS_AS(expert_usage(std::vector<RoutingDecision>{}), DataError);
  CHECK(format_usage({0.201, 0.799}) == "20.1% / 79.9%");
}

TEST_CASE("top-1 usage sums to one") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RoutingDecision> ds;
    for (int i = 0; i < 37; ++i) ds.push_back(pick({rng.index(4)}, 4));
    auto u = expert_usage(ds);
    double s = 0.0;
    for (double x : u.selected) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("gate entropy examples") {
  std::vector<double> uniform{0.5, 0.5, 0.5, 0.5};
  auto e = mean_gate_entropy(uniform, 2);
  CHECK(e.nats == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  CHECK(e.bits == doctest::Approx(1.0).epsilon(1e-15));

  std::vector<double> onehot{1.0, 0.0, 0.0, 1.0};
  e = mean_gate_entropy(onehot, 2);
  CHECK(e.nats == 0.0);
  CHECK(e.bits == 0.0);

  std::vector<double> mixed{0.5, 0.5, 1.0, 0.0};
  e = mean_gate_entropy(mixed, 2);
  CHECK(e.nats == doctest::Approx(0.34657359027997264).epsilon(1e-15));
  CHECK(e.bits == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<double> bad{0.5, 0.6};
  CHECK_THROWS_AS(mean_gate_entropy(bad, 2), ContractError);
}

TEST_CASE("entropy bits are nats over ln 2 exactly") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g;
    for (int i = 0; i < 9; ++i) {
      double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
      double s = a + b + c;
      g.insert(g.end(), {a / s, b / s, c / s});
    }
    auto e = mean_gate_entropy(g, 3);
    CHECK(e.bits == e.nats / std::numbers::ln2);
  }
}

TEST_CASE("classwise routing examples") {
  std::vector<RoutingDecision> ds{pick({1}), pick({1}), pick({0})};
  std::vector<double> g{0.3, 0.7, 0.3, 0.7, 0.3, 0.7};
  std::vector<std::size_t> one_class{0, 0, 0};
  auto c = classwise_routing(ds, g, 2, one_class, {"0"});
  REQUIRE(c.soft.size() == 1);
  CHECK(c.soft[0][0] == doctest::Approx(0.3));
  CHECK(c.soft[0][1] == doctest::Approx(0.7));
  CHECK(c.counts[0] == 3);
  CHECK(c.hard[0][1] == doctest::Approx(2.0 / 3.0));

  std::vector<double> g2{0.9, 0.1, 0.9, 0.1, 0.2, 0.8};
  std::vector<std::size_t> two{0, 0, 1};
  c = classwise_routing(ds, g2, 2, two, {"static", "temporal"});
  CHECK(c.soft[0][0] == doctest::Approx(0.9));
  CHECK(c.soft[1][0] == doctest::Approx(0.2));
  CHECK(c.soft[0] != c.soft[1]);

  auto empty = classwise_routing(ds, g2, 2, two, {"a", "b", "c"});
  CHECK(empty.counts[2] == 0);
  CHECK(empty.soft[2] == std::vector<double>{0.0, 0.0});

  std::vector<std::size_t> short_labels{0, 0};
  CHECK_THROWS_AS(classwise_routing(ds, g2, 2, short_labels, {"0"}), DataError);
  std::vector<double> short_gate{0.5, 0.5};
  CHECK_THROWS_AS(classwise_routing(ds, short_gate, 2, two, {"0", "1"}), DataError);
  std::vector<std::size_t> out_of_range{0, 0, 5};
  CHECK_THROWS_AS(classwise_routing(ds, g2, 2, out_of_range, {"0", "1"}), DataError);
}

TEST_CASE("classwise rows are row-stochastic") {
  Rng rng(12);
  std::vector<RoutingDecision> ds;
  std::vector<double> g;
  std::vector<std::size_t> cls;
  for (int i = 0; i < 200; ++i) {
    double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    double s = a + b + c;
    g.insert(g.end(), {a / s, b / s, c / s});
    ds.push_back(pick({rng.index(3)}, 3));
    cls.push_back(rng.index(4));
  }
  auto c = classwise_routing(ds, g, 3, cls, {"0", "1", "2", "3"});
  for (std::size_t r = 0; r < 4; ++r) {
    double s = c.soft[r][0] + c.soft[r][1] + c.soft[r][2];
    CHECK(std::abs(s - 1.0) <= 1e-6);
    double h = c.hard[r][0] + c.hard[r][1] + c.hard[r][2];
    CHECK(std::abs(h - 1.0) <= 1e-9);
  }
}

TEST_CASE("classification metrics") {
  std::vector<int> y{0, 1, 1, 0, 1};
  auto m = classification_metrics(y, y, 2);
  CHECK(m.accuracy == 1.0);
  CHECK(m.macro_f1 == 1.0);

  // TP=1 FP=1 FN=1 TN=1 for class 1.
  std::vector<int> pred{1, 1, 0, 0};
  std::vector<int> lab{1, 0, 1, 0};
  m = classification_metrics(pred, lab, 2);
  CHECK(m.accuracy == 0.5);
  CHECK(m.macro_f1 == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<int> constant{0, 0, 0, 0};
  std::vector<int> balanced{0, 1, 0, 1};
  m = classification_metrics(constant, balanced, 2);
  CHECK(m.accuracy == 0.5);
  // class 0: P=0.5 R=1 F1=2/3; class 1 F1=0
  CHECK(m.macro_f1 == doctest::Approx(1.0 / 3.0));

  // class 2 never appears on either side and counts as F1 = 0.
  m = classification_metrics(y, y, 3);
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS(classification_metrics(std::vector<int>{}, std::vector<int>{}, 2));
  CHECK_THROWS(classification_metrics(std::vector<int>{0}, std::vector<int>{0, 1}, 2));
}

TEST_CASE("regression metrics and pearson") {
  std::vector<double> y{0.0, 1.0, 2.5, 4.0, 5.0};
  std::vector<double> pred;
  double mse = 0.0;
  for (double v : y) {
    pred.push_back(2.0 * v + 1.0);
    mse += (v + 1.0) * (v + 1.0);
  }
  auto m = regression_metrics(pred, y);
  REQUIRE(m.pearson.has_value());
  CHECK(*m.pearson == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.mse == doctest::Approx(mse / 5.0).epsilon(1e-15));

  std::vector<double> shifted;
  for (double v : y) shifted.push_back(v + 3.0);
  CHECK(*pearson_r(shifted, y) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> flat{2.0, 2.0, 2.0, 2.0, 2.0};
  CHECK_FALSE(pearson_r(flat, y).has_value());
  CHECK_FALSE(regression_metrics(flat, y).pearson.has_value());
}

TEST_CASE("pearson is invariant under positive affine maps") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < 40; ++i) {
      x[i] = rng.uniform(-3, 3);
      y[i] = 0.5 * x[i] + rng.uniform(-2, 2);
    }
    double r = *pearson_r(x, y);
    double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5, 5);
    std::vector<double> xt(40), yt(40);
    for (std::size_t i = 0; i < 40; ++i) {
      xt[i] = a * x[i] + b;
      yt[i] = (a + 1.0) * y[i] - b;
    }
    CHECK(std::abs(*pearson_r(xt, y) - r) <= 1e-9);
    CHECK(std::abs(*pearson_r(x, yt) - r) <= 1e-9);
    CHECK(std::abs(*pearson_r(y, x) - r) <= 1e-12);
  }
}

TEST_CASE("soft usage is the column mean") {
  std::vector<double> g{0.2, 0.8, 0.6, 0.4};
  auto s = soft_usage(g, 2);
  CHECK(s[0] == doctest::Approx(0.4));
  CHECK(s[1] == doctest::Approx(0.6));
}

TEST_CASE("latency profile") {
  ModelConfig cfg;
  HectoModel model(cfg, 1);
  auto data = gen_temporal(30, 2);
  CHECK_THROWS_AS(latency_profile(model, data, 0), ParameterError);

  auto p = latency_profile(model, data, 2);
  CHECK(p.samples == 30);
  std::size_t n = 0;
  double weighted = 0.0;
  for (const auto& path : p.paths) {
    n += path.samples;
    weighted += path.mean_ms * static_cast<double>(path.samples);
  }
  CHECK(n == 30);
  CHECK(p.overall_ms == doctest::Approx(weighted / 30.0).epsilon(1e-9));

  CHECK(latency_profile(model, data, 1, 5).samples == 5);
}

TEST_CASE("ffnn path is faster than gru path on long sequences") {
  ModelConfig ff_cfg;
  ff_cfg.experts = {ExpertKind::ffnn};
  ModelConfig gru_cfg;
  gru_cfg.experts = {ExpertKind::gru};
  HectoModel ff(ff_cfg, 1), gru(gru_cfg, 1);
  auto data = gen_temporal(40, 6, {16, 16});
  auto pf = latency_profile(ff, data, 5);
  auto pg = latency_profile(gru, data, 5);
  REQUIRE(pf.paths.size() == 1);
  REQUIRE(pg.paths.size() == 1);
  CHECK(pf.paths[0].name == "E0");
  MESSAGE("ffnn " << pf.overall_ms << " ms, gru " << pg.overall_ms << " ms");
  CHECK(pf.overall_ms < pg.overall_ms);
}
