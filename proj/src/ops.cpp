// SPDX-License-Identifier: Apache-2.0
#include "hecto/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hecto/error.hpp"
#include "hecto/kernels.hpp"

namespace hecto {

namespace {

inline bool wants(const NodePtr& n) { return n->requires_grad; }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
  }
}

void require_lengths(const char* op, const Tensor& x, std::span<const int> lengths) {
  if (lengths.size() != x.dim(0)) {
    throw DimensionError(std::string(op) + ": " + std::to_string(lengths.size()) + " lengths for " +
                         shape_string(x.shape()));
  }
  for (int len : lengths) {
    if (len < 1 || static_cast<std::size_t>(len) > x.dim(1)) {
      throw DataError(std::string(op) + ": sequence length " + std::to_string(len) +
                      " outside [1, " + std::to_string(x.dim(1)) + "]");
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  const std::size_t m = a.size() / k;
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> out(m * n);
  kernels::gemm(a.data(), b.data(), out, m, k, n, false);
  return Tensor::make_result("matmul", std::move(out_shape), std::move(out), {a, b},
                             [m, k, n](Node& self) {
                               auto& A = self.inputs[0];
                               auto& B = self.inputs[1];
                               if (wants(A)) kernels::gemm_bt(self.grad, B->data, A->grad, m, k, n);
                               if (wants(B)) kernels::gemm_at(A->data, self.grad, B->grad, m, k, n);
                             });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() < 1 || bias.rank() != 1 || x.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: incompatible shapes " + shape_string(x.shape()) + " and " +
                         shape_string(bias.shape()));
  }
  const std::size_t n = bias.dim(0);
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bd = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % n];
  return Tensor::make_result("add_bias", x.shape(), std::move(out), {x, bias}, [n](Node& self) {
    auto& X = self.inputs[0];
    auto& Bv = self.inputs[1];
    if (wants(X)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) X->grad[i] += self.grad[i];
    }
    if (wants(Bv)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) Bv->grad[i % n] += self.grad[i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!wants(in)) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    auto& A = self.inputs[0];
    auto& B = self.inputs[1];
    if (wants(A)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) A->grad[i] += self.grad[i];
    }
    if (wants(B)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) B->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    auto& A = self.inputs[0];
    auto& B = self.inputs[1];
    if (wants(A)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) A->grad[i] += self.grad[i] * B->data[i];
    }
    if (wants(B)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) B->grad[i] += self.grad[i] * A->data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return Tensor::make_result("scale", a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& A = self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) A->grad[i] += self.grad[i] * factor;
  });
}

Tensor activation(const Tensor& x, Activation kind) {
  std::vector<double> out(x.size());
  auto xd = x.data();
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xd[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xd[i]));
      break;
  }
  const char* op = kind == Activation::relu ? "relu" : kind == Activation::tanh ? "tanh" : "sigmoid";
  return Tensor::make_result(op, x.shape(), std::move(out), {x}, [kind](Node& self) {
    auto& X = self.inputs[0];
    const auto& y = self.data;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double d = 0.0;
      switch (kind) {
        case Activation::relu:
          d = X->data[i] > 0.0 ? 1.0 : 0.0;
          break;
        case Activation::tanh:
          d = 1.0 - y[i] * y[i];
          break;
        case Activation::sigmoid:
          d = y[i] * (1.0 - y[i]);
          break;
      }
      X->grad[i] += self.grad[i] * d;
    }
  });
}

Tensor softmax_temperature(const Tensor& logits, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ParameterError("softmax temperature must be positive, got " + std::to_string(tau));
  }
  if (logits.rank() < 1) throw DimensionError("softmax_temperature: scalar input");
  const std::size_t k = logits.shape().back();
  const std::size_t rows = logits.size() / k;
  std::vector<double> out(logits.size());
  auto ld = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = ld.data() + r * k;
    double* o = out.data() + r * k;
    const double mx = *std::max_element(in, in + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      o[j] = std::exp((in[j] - mx) / tau);
      z += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= z;
  }
  return Tensor::make_result("softmax_temperature", logits.shape(), std::move(out), {logits},
                             [k, rows, tau](Node& self) {
                               auto& L = self.inputs[0];
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const double* p = self.data.data() + r * k;
                                 const double* g = self.grad.data() + r * k;
                                 double dot = 0.0;
                                 for (std::size_t j = 0; j < k; ++j) dot += p[j] * g[j];
                                 for (std::size_t j = 0; j < k; ++j) {
                                   L->grad[r * k + j] += p[j] * (g[j] - dot) / tau;
                                 }
                               }
                             });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank("cross_entropy", logits, 2);
  const std::size_t b = logits.dim(0);
  const std::size_t c = logits.dim(1);
  if (labels.size() != b) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(logits.shape()));
  }
  if (b == 0) throw DataError("cross_entropy: empty batch");
  auto ld = logits.data();
  std::vector<double> probs(b * c);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw DataError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                      std::to_string(c) + ")");
    }
    const double* row = ld.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    total += -(row[labels[i]] - mx - std::log(z));
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return Tensor::make_result("cross_entropy", {}, {total / static_cast<double>(b)}, {logits},
                             [probs = std::move(probs), lab = std::move(lab), b, c](Node& self) {
                               auto& L = self.inputs[0];
                               const double g = self.grad[0] / static_cast<double>(b);
                               for (std::size_t i = 0; i < b; ++i) {
                                 for (std::size_t j = 0; j < c; ++j) {
                                   const double onehot = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
                                   L->grad[i * c + j] += g * (probs[i * c + j] - onehot);
                                 }
                               }
                             });
}

Tensor mse(const Tensor& pred, std::span<const double> target) {
  const bool column = pred.rank() == 2 && pred.dim(1) == 1;
  if (!(pred.rank() == 1 || column) || pred.size() != target.size()) {
    throw DimensionError("mse: prediction " + shape_string(pred.shape()) + " vs " +
                         std::to_string(target.size()) + " targets");
  }
  if (target.empty()) throw DataError("mse: empty batch");
  const std::size_t n = target.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pred[i] - target[i];
    total += d * d;
  }
  std::vector<double> tgt(target.begin(), target.end());
  return Tensor::make_result("mse", {}, {total / static_cast<double>(n)}, {pred},
                             [tgt = std::move(tgt), n](Node& self) {
                               auto& P = self.inputs[0];
                               const double g = self.grad[0] * 2.0 / static_cast<double>(n);
                               for (std::size_t i = 0; i < n; ++i) P->grad[i] += g * (P->data[i] - tgt[i]);
                             });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result("sum", {}, {s}, {x}, [](Node& self) {
    auto& X = self.inputs[0];
    for (auto& g : X->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DataError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& X = self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) X->grad[i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() < 1) throw DimensionError("gather_rows: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t stride = rows == 0 ? 0 : x.size() / rows;
  std::vector<double> out(index.size() * stride);
  auto xd = x.data();
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= rows) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(index[r] * stride), stride,
                out.begin() + static_cast<std::ptrdiff_t>(r * stride));
  }
  Shape shape = x.shape();
  shape[0] = index.size();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return Tensor::make_result("gather_rows", std::move(shape), std::move(out), {x},
                             [idx = std::move(idx), stride](Node& self) {
                               auto& X = self.inputs[0];
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 for (std::size_t j = 0; j < stride; ++j) {
                                   X->grad[idx[r] * stride + j] += self.grad[r * stride + j];
                                 }
                               }
                             });
}

Tensor slice_steps(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank("slice_steps", x, 3);
  const std::size_t b = x.dim(0);
  const std::size_t t = x.dim(1);
  const std::size_t c = x.dim(2);
  if (begin > end || end > t) throw DimensionError("slice_steps: range out of bounds for " + shape_string(x.shape()));
  const std::size_t len = end - begin;
  std::vector<double> out(b * len * c);
  auto xd = x.data();
  for (std::size_t i = 0; i < b; ++i) {
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>((i * t + begin) * c), len * c,
                out.begin() + static_cast<std::ptrdiff_t>(i * len * c));
  }
  return Tensor::make_result("slice_steps", {b, len, c}, std::move(out), {x},
                             [b, t, c, begin, len](Node& self) {
                               auto& X = self.inputs[0];
                               for (std::size_t i = 0; i < b; ++i) {
                                 for (std::size_t j = 0; j < len * c; ++j) {
                                   X->grad[(i * t + begin) * c + j] += self.grad[i * len * c + j];
                                 }
                               }
                             });
}

Tensor time_step(const Tensor& x, std::size_t t) {
  require_rank("time_step", x, 3);
  auto s = slice_steps(x, t, t + 1);
  return reshape(s, {x.dim(0), x.dim(2)});
}

Tensor masked_update(const Tensor& updated, const Tensor& previous, std::span<const std::uint8_t> active) {
  require_same_shape("masked_update", updated, previous);
  const std::size_t rows = updated.rank() == 0 ? 1 : updated.dim(0);
  if (active.size() != rows) throw DimensionError("masked_update: mask length does not match rows");
  const std::size_t stride = rows == 0 ? 0 : updated.size() / rows;
  std::vector<double> out(updated.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& src = active[r] ? updated : previous;
    std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(r * stride), stride,
                out.begin() + static_cast<std::ptrdiff_t>(r * stride));
  }
  std::vector<std::uint8_t> mask(active.begin(), active.end());
  return Tensor::make_result("masked_update", updated.shape(), std::move(out), {updated, previous},
                             [mask = std::move(mask), stride](Node& self) {
                               for (std::size_t r = 0; r < mask.size(); ++r) {
                                 auto& dst = mask[r] ? self.inputs[0] : self.inputs[1];
                                 if (!wants(dst)) continue;
                                 for (std::size_t j = 0; j < stride; ++j) {
                                   dst->grad[r * stride + j] += self.grad[r * stride + j];
                                 }
                               }
                             });
}

Tensor last_step(const Tensor& x, std::span<const int> lengths) {
  require_rank("last_step", x, 3);
  require_lengths("last_step", x, lengths);
  const std::size_t b = x.dim(0);
  const std::size_t t = x.dim(1);
  const std::size_t c = x.dim(2);
  std::vector<double> out(b * c);
  std::vector<std::size_t> src(b);
  auto xd = x.data();
  for (std::size_t i = 0; i < b; ++i) {
    src[i] = (i * t + static_cast<std::size_t>(lengths[i] - 1)) * c;
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(src[i]), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return Tensor::make_result("last_step", {b, c}, std::move(out), {x}, [src = std::move(src), c](Node& self) {
    auto& X = self.inputs[0];
    for (std::size_t i = 0; i < src.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) X->grad[src[i] + j] += self.grad[i * c + j];
    }
  });
}

Tensor masked_mean_steps(const Tensor& x, std::span<const int> lengths) {
  require_rank("masked_mean_steps", x, 3);
  require_lengths("masked_mean_steps", x, lengths);
  const std::size_t b = x.dim(0);
  const std::size_t t = x.dim(1);
  const std::size_t c = x.dim(2);
  std::vector<double> out(b * c, 0.0);
  auto xd = x.data();
  for (std::size_t i = 0; i < b; ++i) {
    const auto len = static_cast<std::size_t>(lengths[i]);
    for (std::size_t s = 0; s < len; ++s) {
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] += xd[(i * t + s) * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= static_cast<double>(len);
  }
  std::vector<int> lens(lengths.begin(), lengths.end());
  return Tensor::make_result("masked_mean_steps", {b, c}, std::move(out), {x},
                             [lens = std::move(lens), t, c](Node& self) {
                               auto& X = self.inputs[0];
                               for (std::size_t i = 0; i < lens.size(); ++i) {
                                 const double inv = 1.0 / static_cast<double>(lens[i]);
                                 for (std::size_t s = 0; s < static_cast<std::size_t>(lens[i]); ++s) {
                                   for (std::size_t j = 0; j < c; ++j) {
                                     X->grad[(i * t + s) * c + j] += self.grad[i * c + j] * inv;
                                   }
                                 }
                               }
                             });
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::size_t dilation) {
  require_rank("causal_conv1d", x, 3);
  require_rank("causal_conv1d", kernel, 3);
  if (kernel.dim(1) != x.dim(2) || bias.rank() != 1 || bias.dim(0) != kernel.dim(2) || dilation == 0) {
    throw DimensionError("causal_conv1d: input " + shape_string(x.shape()) + ", kernel " +
                         shape_string(kernel.shape()) + ", bias " + shape_string(bias.shape()));
  }
  const kernels::ConvShape s{x.dim(0), x.dim(1), x.dim(2), kernel.dim(2), kernel.dim(0), dilation};
  std::vector<double> out(s.batch * s.steps * s.out_channels);
  kernels::causal_conv(x.data(), kernel.data(), bias.data(), out, s);
  return Tensor::make_result("causal_conv1d", {s.batch, s.steps, s.out_channels}, std::move(out),
                             {x, kernel, bias}, [s](Node& self) {
                               auto& X = self.inputs[0];
                               auto& W = self.inputs[1];
                               auto& Bv = self.inputs[2];
                               kernels::causal_conv_backward(
                                   X->data, W->data, self.grad,
                                   wants(X) ? std::span<double>(X->grad) : std::span<double>(),
                                   wants(W) ? std::span<double>(W->grad) : std::span<double>(),
                                   wants(Bv) ? std::span<double>(Bv->grad) : std::span<double>(), s);
                             });
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw ContractError("dropout in training mode needs a random source");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
    out[i] = x[i] * mask[i];
  }
  return Tensor::make_result("dropout", x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    auto& X = self.inputs[0];
    for (std::size_t i = 0; i < mask.size(); ++i) X->grad[i] += self.grad[i] * mask[i];
  });
}

}  // namespace hecto
