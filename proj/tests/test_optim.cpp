// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <string>

#include "doctest.h"
#include "hecto/error.hpp"
#include "hecto/optim.hpp"

using namespace hecto;

namespace {

Parameter scalar_param(const std::string& name, double value, double grad) {
  Parameter p{name, Tensor::from({1}, {value}, true)};
  p.value.grad()[0] = grad;
  return p;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto p = scalar_param("w", 0.37, 2.5);
  AdamW opt({p}, {.learning_rate = 0.0});
  for (int i = 0; i < 3; ++i) opt.step();
  CHECK(p.value[0] == 0.37);
  CHECK(opt.steps() == 3);
}

TEST_CASE("zero gradient gives pure decoupled decay") {
  auto p = scalar_param("w", 2.0, 0.0);
  AdamW opt({p}, {.learning_rate = 0.1, .weight_decay = 0.5});
  opt.step();
  CHECK(p.value[0] == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-15));
}

TEST_CASE("first step with unit gradient moves by about the learning rate") {
  // m = 0.1, v = 0.001; bias correction gives m_hat = v_hat = 1, so the
  // update is 0.1 / (1 + 1e-8).
  auto p = scalar_param("w", 1.0, 1.0);
  AdamW opt({p}, {.learning_rate = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.0});
  opt.step();
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(p.value[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("second step follows the moment recursions") {
  auto p = scalar_param("w", 0.0, 1.0);
  AdamWConfig cfg{.learning_rate = 0.01, .weight_decay = 0.0};
  AdamW opt({p}, cfg);
  opt.step();
  p.value.grad()[0] = -3.0;
  opt.step();
  double m = 0.9 * 0.1 + 0.1 * -3.0;
  double v = 0.999 * 0.001 + 0.001 * 9.0;
  double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  double expected = -0.01 * (1.0 / (1.0 + 1e-8)) - 0.01 * mh / (std::sqrt(vh) + 1e-8);
  CHECK(p.value[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("frozen parameters are untouched") {
  auto live = scalar_param("live", 1.0, 1.0);
  auto frozen = scalar_param("frozen", 1.0, 1.0);
  frozen.value.set_requires_grad(false);
  AdamW opt({live, frozen}, {.learning_rate = 0.1, .weight_decay = 0.1});
  opt.step();
  CHECK(frozen.value[0] == 1.0);
  CHECK(live.value[0] != 1.0);
}

TEST_CASE("non-finite gradient names the parameter and changes nothing") {
  auto a = scalar_param("encoder.tokens", 1.0, 1.0);
  Parameter b{"gate.w2", Tensor::from({2}, {0.5, 0.5}, true)};
  b.value.grad()[1] = std::numeric_limits<double>::quiet_NaN();
  AdamW opt({a, b}, {.learning_rate = 0.1});
  try {
    opt.step();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("gate.w2[1]") != std::string::npos);
  }
  CHECK(a.value[0] == 1.0);
  CHECK(b.value[0] == 0.5);
  CHECK(opt.steps() == 0);

  b.value.grad()[1] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(opt.step(), NumericError);
}

TEST_CASE("zero_grad clears gradients and config validation") {
  auto p = scalar_param("w", 1.0, 4.0);
  AdamW opt({p}, {});
  opt.zero_grad();
  CHECK(p.value.grad()[0] == 0.0);
  CHECK_THROWS_AS(AdamW({p}, {.learning_rate = -1.0}), ParameterError);
  CHECK_THROWS_AS(AdamW({p}, {.beta1 = 1.0}), ParameterError);
  CHECK_THROWS_AS(AdamW({p}, {.eps = 0.0}), ParameterError);
}
