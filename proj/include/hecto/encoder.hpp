// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hecto/rng.hpp"
#include "hecto/tensor.hpp"

namespace hecto {

struct EncoderConfig {
  std::size_t vocab_size = 32;
  std::size_t d_embed = 32;
  /// Summary slot plus at most max_len - 1 tokens.
  std::size_t max_len = 24;
  bool frozen = false;

  void validate() const;
};

/// Right-padded token ids, [batch x steps] row-major, with true lengths.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<int> ids;
  std::vector<int> lengths;

  int id(std::size_t i, std::size_t t) const { return ids[i * steps + t]; }
  void validate(std::size_t vocab_size) const;
};

/// Packs sequences into a batch padded to the longest one.
TokenBatch make_token_batch(std::span<const std::vector<int>> sequences);

/// Stand-in for a pretrained transformer encoder. Output H is
/// [B x (T + 1) x d_embed]: slot 0 is the order-invariant mean of the token
/// embeddings over the true length, slots 1..T are token + positional
/// embeddings, padded slots are zero.
class Encoder {
 public:
  Encoder(const EncoderConfig& config, Rng& rng);

  Tensor encode(const TokenBatch& batch) const;

  /// Frozen tables stop requiring gradients, so the optimizer skips them.
  void set_frozen(bool flag);
  bool frozen() const { return frozen_; }

  const EncoderConfig& config() const { return config_; }
  const Tensor& token_table() const { return tokens_; }
  const Tensor& position_table() const { return positions_; }

  void collect_parameters(std::vector<Parameter>& out) const;

 private:
  EncoderConfig config_;
  Tensor tokens_;     // [vocab x d_embed]
  Tensor positions_;  // [(max_len - 1) x d_embed]
  bool frozen_ = false;
};

}  // namespace hecto
