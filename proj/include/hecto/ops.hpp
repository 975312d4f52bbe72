// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hecto/rng.hpp"
#include "hecto/tensor.hpp"

// Differentiable primitives. Shapes are row-major; "rows" means the leading
// dimension. Sequence tensors are laid out [batch x steps x channels].

namespace hecto {

enum class Activation { relu, tanh, sigmoid };

/// a[..., k] x b[k x n] -> [..., n]. Leading dimensions of `a` are flattened
/// into rows.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., n] + bias[n], broadcast over every leading index.
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor activation(const Tensor& x, Activation kind);
inline Tensor relu(const Tensor& x) { return activation(x, Activation::relu); }
inline Tensor tanh(const Tensor& x) { return activation(x, Activation::tanh); }
inline Tensor sigmoid(const Tensor& x) { return activation(x, Activation::sigmoid); }

/// Row-wise softmax of logits / tau over the last dimension, max-subtracted.
Tensor softmax_temperature(const Tensor& logits, double tau);

/// Mean over rows of -log softmax(logits_i)[label_i]; logits [B x C].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Mean squared error; pred is [B] or [B x 1].
Tensor mse(const Tensor& pred, std::span<const double> target);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

/// Rows `index` of x along the leading dimension.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

/// x[:, t, :] of a [B x T x C] tensor -> [B x C].
Tensor time_step(const Tensor& x, std::size_t t);

/// x[:, begin:end, :] -> [B x (end - begin) x C].
Tensor slice_steps(const Tensor& x, std::size_t begin, std::size_t end);

/// Row i is taken from `updated` where active[i] != 0, otherwise from `previous`.
Tensor masked_update(const Tensor& updated, const Tensor& previous, std::span<const std::uint8_t> active);

/// x[i, lengths[i] - 1, :] for a [B x T x C] tensor.
Tensor last_step(const Tensor& x, std::span<const int> lengths);

/// Mean of x[i, 0:lengths[i], :] per row.
Tensor masked_mean_steps(const Tensor& x, std::span<const int> lengths);

/// Causal dilated 1-D convolution. x [B x T x Cin], kernel [taps x Cin x Cout],
/// bias [Cout]. Tap j reads position t - j*dilation; positions before 0 are zero.
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t dilation);

/// Inverted dropout. Identity when `training` is false or rate is 0.
Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng);

}  // namespace hecto
