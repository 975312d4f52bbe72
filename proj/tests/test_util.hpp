// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "hecto/rng.hpp"
#include "hecto/tensor.hpp"

namespace hecto::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }
inline std::vector<double> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

/// Random row-stochastic matrix with entries bounded away from 0.
inline Tensor random_simplex_rows(std::size_t rows, std::size_t k, Rng& rng) {
  std::vector<double> v(rows * k);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      v[i * k + j] = 0.05 + rng.uniform();
      s += v[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) v[i * k + j] /= s;
  }
  return Tensor::from({rows, k}, std::move(v), true);
}

}  // namespace hecto::testing

#include "hecto/encoder.hpp"

namespace hecto::testing {

inline std::vector<std::vector<int>> random_sequences(std::size_t n, int min_len, int max_len, int vocab, Rng& rng) {
  std::vector<std::vector<int>> out(n);
  for (auto& s : out) {
    s.resize(static_cast<std::size_t>(rng.between(min_len, max_len)));
    for (auto& t : s) t = rng.between(0, vocab - 1);
  }
  return out;
}

inline TokenBatch random_batch(std::size_t n, int min_len, int max_len, int vocab, Rng& rng) {
  auto seqs = random_sequences(n, min_len, max_len, vocab, rng);
  return make_token_batch(seqs);
}

}  // namespace hecto::testing
