// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

// Dense numeric kernels behind the autodiff primitives.
//
// Every kernel has a serial reference in `kernels::serial` and an OpenMP
// version in `kernels::parallel`. Both compute each output element with the
// same summation order, so results agree bitwise; the parallel versions only
// split the outermost output loop across threads. The unqualified entry points
// dispatch according to the process-wide Policy.

namespace hecto::kernels {

enum class Policy { serial, parallel, automatic };

void set_policy(Policy p);
Policy policy();

/// Work (multiply-adds) at which `automatic` switches to the parallel kernels.
inline constexpr std::size_t kParallelThreshold = std::size_t{1} << 15;

/// RAII override of the dispatch policy.
class PolicyScope {
 public:
  explicit PolicyScope(Policy p) : saved_(policy()) { set_policy(p); }
  ~PolicyScope() { set_policy(saved_); }
  PolicyScope(const PolicyScope&) = delete;
  PolicyScope& operator=(const PolicyScope&) = delete;

 private:
  Policy saved_;
};

int max_threads();

struct ConvShape {
  std::size_t batch;
  std::size_t steps;
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t taps;
  std::size_t dilation;
};

#define HECTO_KERNEL_SET                                                                       \
  /* c (+)= a[m x k] * b[k x n] */                                                             \
  void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,         \
            std::size_t m, std::size_t k, std::size_t n, bool accumulate);                     \
  /* da[m x k] += dc[m x n] * b[k x n]^T */                                                    \
  void gemm_bt(std::span<const double> dc, std::span<const double> b, std::span<double> da,    \
               std::size_t m, std::size_t k, std::size_t n);                                   \
  /* db[k x n] += a[m x k]^T * dc[m x n] */                                                    \
  void gemm_at(std::span<const double> a, std::span<const double> dc, std::span<double> db,    \
               std::size_t m, std::size_t k, std::size_t n);                                   \
  /* y[b,t,o] = bias[o] + sum_j sum_c x[b, t - j*dilation, c] * w[j,c,o], zero left padding */ \
  void causal_conv(std::span<const double> x, std::span<const double> w,                       \
                   std::span<const double> bias, std::span<double> y, const ConvShape& s);     \
  /* accumulates input, kernel and bias gradients */                                           \
  void causal_conv_backward(std::span<const double> x, std::span<const double> w,              \
                            std::span<const double> dy, std::span<double> dx,                  \
                            std::span<double> dw, std::span<double> dbias, const ConvShape& s);

namespace serial {
HECTO_KERNEL_SET
}
namespace parallel {
HECTO_KERNEL_SET
}
HECTO_KERNEL_SET

#undef HECTO_KERNEL_SET

}  // namespace hecto::kernels
