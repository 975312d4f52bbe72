// SPDX-License-Identifier: Apache-2.0
#include "hecto/encoder.hpp"

#include <algorithm>

#include "hecto/error.hpp"

namespace hecto {

namespace {
Tensor uniform_table(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(-0.1, 0.1);
  return Tensor::from({rows, cols}, std::move(v), true);
}
}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size < 2) throw ParameterError("encoder.vocab_size must be >= 2");
  if (max_len < 2) throw ParameterError("encoder.max_len must be >= 2");
  if (d_embed < 1) throw ParameterError("encoder.d_embed must be >= 1");
}

void TokenBatch::validate(std::size_t vocab_size) const {
  if (ids.size() != batch * steps || lengths.size() != batch) {
    throw DimensionError("token batch buffers do not match " + std::to_string(batch) + "x" +
                         std::to_string(steps));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (lengths[i] < 1 || static_cast<std::size_t>(lengths[i]) > steps) {
      throw DataError("sequence " + std::to_string(i) + " has length " + std::to_string(lengths[i]));
    }
    for (std::size_t t = 0; t < static_cast<std::size_t>(lengths[i]); ++t) {
      const int tok = id(i, t);
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_size) {
        throw DataError("token id " + std::to_string(tok) + " outside vocabulary of size " +
                        std::to_string(vocab_size));
      }
    }
  }
}

TokenBatch make_token_batch(std::span<const std::vector<int>> sequences) {
  TokenBatch b;
  b.batch = sequences.size();
  for (const auto& s : sequences) b.steps = std::max(b.steps, s.size());
  b.ids.assign(b.batch * b.steps, 0);
  b.lengths.reserve(b.batch);
  for (std::size_t i = 0; i < b.batch; ++i) {
    std::copy(sequences[i].begin(), sequences[i].end(), b.ids.begin() + static_cast<std::ptrdiff_t>(i * b.steps));
    b.lengths.push_back(static_cast<int>(sequences[i].size()));
  }
  return b;
}

Encoder::Encoder(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  tokens_ = uniform_table(config_.vocab_size, config_.d_embed, rng);
  positions_ = uniform_table(config_.max_len - 1, config_.d_embed, rng);
  set_frozen(config_.frozen);
}

void Encoder::set_frozen(bool flag) {
  frozen_ = flag;
  config_.frozen = flag;
  tokens_.set_requires_grad(!flag);
  positions_.set_requires_grad(!flag);
  if (flag) {
    tokens_.zero_grad();
    positions_.zero_grad();
  }
}

void Encoder::collect_parameters(std::vector<Parameter>& out) const {
  out.push_back({"encoder.token_embedding", tokens_});
  out.push_back({"encoder.position_embedding", positions_});
}

Tensor Encoder::encode(const TokenBatch& batch) const {
  batch.validate(config_.vocab_size);
  if (batch.steps + 1 > config_.max_len) {
    throw DataError("sequence of " + std::to_string(batch.steps) + " tokens exceeds max_len " +
                    std::to_string(config_.max_len));
  }
  const std::size_t b = batch.batch;
  const std::size_t slots = batch.steps + 1;
  const std::size_t d = config_.d_embed;
  auto emb = tokens_.data();
  auto pos = positions_.data();
  std::vector<double> out(b * slots * d, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const auto len = static_cast<std::size_t>(batch.lengths[i]);
    double* summary = out.data() + i * slots * d;
    // Summing in sorted-id order makes the summary bitwise permutation invariant.
    std::vector<int> sorted(batch.ids.begin() + static_cast<std::ptrdiff_t>(i * batch.steps),
                            batch.ids.begin() + static_cast<std::ptrdiff_t>(i * batch.steps + len));
    std::sort(sorted.begin(), sorted.end());
    for (int tok : sorted) {
      const double* e = emb.data() + static_cast<std::size_t>(tok) * d;
      for (std::size_t j = 0; j < d; ++j) summary[j] += e[j];
    }
    for (std::size_t j = 0; j < d; ++j) summary[j] /= static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) {
      const double* e = emb.data() + static_cast<std::size_t>(batch.id(i, t)) * d;
      const double* p = pos.data() + t * d;
      double* slot = out.data() + (i * slots + 1 + t) * d;
      for (std::size_t j = 0; j < d; ++j) slot[j] = e[j] + p[j];
    }
  }
  return Tensor::make_result(
      "encode", {b, slots, d}, std::move(out), {tokens_, positions_},
      [ids = batch.ids, lengths = batch.lengths, steps = batch.steps, slots, d](Node& self) {
        auto& E = self.inputs[0];
        auto& P = self.inputs[1];
        for (std::size_t i = 0; i < lengths.size(); ++i) {
          const auto len = static_cast<std::size_t>(lengths[i]);
          const double inv = 1.0 / static_cast<double>(len);
          const double* gsum = self.grad.data() + i * slots * d;
          for (std::size_t t = 0; t < len; ++t) {
            const auto tok = static_cast<std::size_t>(ids[i * steps + t]);
            const double* gslot = self.grad.data() + (i * slots + 1 + t) * d;
            if (E->requires_grad) {
              for (std::size_t j = 0; j < d; ++j) E->grad[tok * d + j] += gsum[j] * inv + gslot[j];
            }
            if (P->requires_grad) {
              for (std::size_t j = 0; j < d; ++j) P->grad[t * d + j] += gslot[j];
            }
          }
        }
      });
}

}  // namespace hecto
