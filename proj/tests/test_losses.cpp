// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "hecto/error.hpp"
#include "hecto/gradcheck.hpp"
#include "hecto/losses.hpp"
#include "hecto/ops.hpp"
#include "test_util.hpp"

using namespace hecto;

TEST_CASE("entropy penalty examples") {
  CHECK(entropy_penalty(Tensor::from({2, 2}, {1, 0, 0, 1})).item() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(entropy_penalty(Tensor::from({1, 2}, {0.5, 0.5})).item() == doctest::Approx(std::log(2.0)));
  // (0 + ln 2) / 2, evaluated independently
  CHECK(std::abs(entropy_penalty(Tensor::from({2, 2}, {1, 0, 0.5, 0.5})).item() - 0.34657359027997264) < 1e-4);
  CHECK_THROWS_AS(entropy_penalty(Tensor::from({1, 2}, {0.5, 0.4})), ContractError);
}

TEST_CASE("diversity penalty examples") {
  CHECK(diversity_penalty(Tensor::from({2, 2}, {1, 0, 0, 1})).item() == doctest::Approx(0.5));
  CHECK(diversity_penalty(Tensor::from({2, 2}, {1, 0, 1, 0})).item() == doctest::Approx(1.0));
  CHECK(diversity_penalty(Tensor::full({3, 4}, 0.25)).item() == doctest::Approx(0.25));
  CHECK(diversity_penalty(Tensor::from({2, 2}, {1, 0, 0.5, 0.5})).item() == doctest::Approx(0.625).epsilon(1e-12));
  CHECK_THROWS_AS(diversity_penalty(Tensor::from({1, 2}, {0.9, 0.3})), ContractError);
}

TEST_CASE("total loss examples") {
  auto g = Tensor::from({2, 2}, {1, 0, 0.5, 0.5});
  auto task = Tensor::scalar(1.0);
  CHECK(std::abs(total_loss(task, g, {}).item() - 1.0673286795139987) < 1e-4);
  auto onehot = Tensor::from({2, 2}, {1, 0, 1, 0});
  CHECK(total_loss(task, onehot, {}).item() == doctest::Approx(1.0 + 0.08 * 1.0));
  CHECK_THROWS_AS(total_loss(task, g, {.lambda_ent = -0.1, .lambda_div = 0.0}), ParameterError);
}

TEST_CASE("zero weights return the task loss bitwise") {
  Rng rng(1);
  auto g = hecto::testing::random_simplex_rows(5, 3, rng);
  auto task = Tensor::scalar(0.1 + 0.2, true);
  auto total = total_loss(task, g, {0.0, 0.0});
  CHECK(total.item() == task.item());
  CHECK(total.node() == task.node());
}

TEST_CASE("penalty bounds") {
  Rng rng(2);
  for (std::size_t k : {2u, 3u, 4u}) {
    for (int trial = 0; trial < 50; ++trial) {
      auto g = hecto::testing::random_simplex_rows(6, k, rng);
      const double e = entropy_penalty(g).item();
      const double d = diversity_penalty(g).item();
      CHECK(e >= 0.0);
      CHECK(e <= std::log(static_cast<double>(k)) + 1e-12);
      CHECK(d >= 1.0 / static_cast<double>(k) - 1e-12);
      CHECK(d <= 1.0 + 1e-12);
    }
    auto uniform = Tensor::full({3, k}, 1.0 / static_cast<double>(k));
    CHECK(entropy_penalty(uniform).item() == doctest::Approx(std::log(static_cast<double>(k))));
    CHECK(diversity_penalty(uniform).item() == doctest::Approx(1.0 / static_cast<double>(k)));
  }
}

TEST_CASE("diversity decreases along the path from skewed to uniform usage") {
  const std::vector<double> skewed{0.9, 0.05, 0.05}, uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double prev = 2.0;
  for (int step = 0; step <= 20; ++step) {
    const double a = step / 20.0;
    std::vector<double> row(3);
    for (std::size_t j = 0; j < 3; ++j) row[j] = (1 - a) * skewed[j] + a * uniform[j];
    const double d = diversity_penalty(Tensor::from({1, 3}, row)).item();
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("penalty gradients pass finite differences") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = hecto::testing::random_simplex_rows(4, 3, rng);
    // Perturbations leave the simplex by epsilon, inside the 1e-6 row-sum contract.
    GradCheckOptions opt{.epsilon = 1e-7, .tolerance = 1e-5};
    CHECK(finite_diff_check([&] { return entropy_penalty(g); }, std::vector<Parameter>{{"g", g}}, opt).passed);
    CHECK(finite_diff_check([&] { return diversity_penalty(g); }, std::vector<Parameter>{{"g", g}}, opt).passed);
    auto task = Tensor::scalar(0.7, true);
    CHECK(finite_diff_check([&] { return total_loss(task, g, {}); },
                            std::vector<Parameter>{{"g", g}, {"task", task}}, opt)
              .passed);
  }
}

TEST_CASE("penalties through a softmax stay on the simplex") {
  Rng rng(4);
  auto logits = hecto::testing::random_tensor({5, 4}, rng, -2.0, 2.0);
  auto f = [&] { return total_loss(Tensor::scalar(0.0), softmax_temperature(logits, 1.5), {}); };
  CHECK(finite_diff_check(f, std::vector<Parameter>{{"logits", logits}}, {.tolerance = 1e-5}).passed);
}
