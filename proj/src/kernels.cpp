// SPDX-License-Identifier: Apache-2.0
#include "hecto/kernels.hpp"

#include <atomic>
#include <cstdint>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace hecto::kernels {

namespace {
std::atomic<Policy> g_policy{Policy::automatic};

bool use_parallel(std::size_t work) {
  switch (g_policy.load(std::memory_order_relaxed)) {
    case Policy::serial:
      return false;
    case Policy::parallel:
      return true;
    case Policy::automatic:
      return work >= kParallelThreshold && max_threads() > 1;
  }
  return false;
}

using Index = std::int64_t;

// Row kernels shared by both variants. Each writes a disjoint slice of the
// output, which is what makes the parallel loops race-free.

inline void gemm_row(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                     bool accumulate) {
  if (!accumulate) {
    for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  }
  for (std::size_t t = 0; t < k; ++t) {
    const double av = a[t];
    const double* brow = b + t * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void gemm_bt_row(const double* dc, const double* b, double* da, std::size_t k,
                        std::size_t n) {
  for (std::size_t t = 0; t < k; ++t) {
    const double* brow = b + t * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += dc[j] * brow[j];
    da[t] += s;
  }
}

// Row t of db = sum_i a[i][t] * dc[i][:]
inline void gemm_at_row(const double* a, const double* dc, double* db_row, std::size_t t,
                        std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + t];
    const double* dcrow = dc + i * n;
    for (std::size_t j = 0; j < n; ++j) db_row[j] += av * dcrow[j];
  }
}

inline void conv_sample(const double* x, const double* w, const double* bias, double* y,
                        const ConvShape& s) {
  for (std::size_t t = 0; t < s.steps; ++t) {
    double* yt = y + t * s.out_channels;
    for (std::size_t o = 0; o < s.out_channels; ++o) yt[o] = bias[o];
    for (std::size_t j = 0; j < s.taps; ++j) {
      const std::size_t offset = j * s.dilation;
      if (offset > t) break;
      const double* xt = x + (t - offset) * s.in_channels;
      const double* wj = w + j * s.in_channels * s.out_channels;
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        const double xv = xt[c];
        const double* wrow = wj + c * s.out_channels;
        for (std::size_t o = 0; o < s.out_channels; ++o) yt[o] += xv * wrow[o];
      }
    }
  }
}

inline void conv_dx_sample(const double* w, const double* dy, double* dx, const ConvShape& s) {
  for (std::size_t t = 0; t < s.steps; ++t) {
    const double* dyt = dy + t * s.out_channels;
    for (std::size_t j = 0; j < s.taps; ++j) {
      const std::size_t offset = j * s.dilation;
      if (offset > t) break;
      double* dxt = dx + (t - offset) * s.in_channels;
      const double* wj = w + j * s.in_channels * s.out_channels;
      for (std::size_t c = 0; c < s.in_channels; ++c) {
        const double* wrow = wj + c * s.out_channels;
        double acc = 0.0;
        for (std::size_t o = 0; o < s.out_channels; ++o) acc += dyt[o] * wrow[o];
        dxt[c] += acc;
      }
    }
  }
}

// dw[j, c, :] = sum_b sum_t dy[b, t, :] * x[b, t - j*d, c]
inline void conv_dw_row(const double* x, const double* dy, double* dw_row, std::size_t j,
                        std::size_t c, const ConvShape& s) {
  const std::size_t offset = j * s.dilation;
  for (std::size_t b = 0; b < s.batch; ++b) {
    const double* xb = x + b * s.steps * s.in_channels;
    const double* dyb = dy + b * s.steps * s.out_channels;
    for (std::size_t t = offset; t < s.steps; ++t) {
      const double xv = xb[(t - offset) * s.in_channels + c];
      const double* dyt = dyb + t * s.out_channels;
      for (std::size_t o = 0; o < s.out_channels; ++o) dw_row[o] += xv * dyt[o];
    }
  }
}

inline void conv_dbias(const double* dy, double* dbias, const ConvShape& s) {
  for (std::size_t r = 0; r < s.batch * s.steps; ++r) {
    const double* row = dy + r * s.out_channels;
    for (std::size_t o = 0; o < s.out_channels; ++o) dbias[o] += row[o];
  }
}

}  // namespace

void set_policy(Policy p) { g_policy.store(p, std::memory_order_relaxed); }
Policy policy() { return g_policy.load(std::memory_order_relaxed); }

int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------- serial

namespace serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) gemm_row(a.data() + i * k, b.data(), c.data() + i * n, k, n, accumulate);
}

void gemm_bt(std::span<const double> dc, std::span<const double> b, std::span<double> da,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) gemm_bt_row(dc.data() + i * n, b.data(), da.data() + i * k, k, n);
}

void gemm_at(std::span<const double> a, std::span<const double> dc, std::span<double> db,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t t = 0; t < k; ++t) gemm_at_row(a.data(), dc.data(), db.data() + t * n, t, m, k, n);
}

void causal_conv(std::span<const double> x, std::span<const double> w,
                 std::span<const double> bias, std::span<double> y, const ConvShape& s) {
  for (std::size_t b = 0; b < s.batch; ++b) {
    conv_sample(x.data() + b * s.steps * s.in_channels, w.data(), bias.data(),
                y.data() + b * s.steps * s.out_channels, s);
  }
}

void causal_conv_backward(std::span<const double> x, std::span<const double> w,
                          std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                          std::span<double> dbias, const ConvShape& s) {
  if (!dx.empty()) {
    for (std::size_t b = 0; b < s.batch; ++b) {
      conv_dx_sample(w.data(), dy.data() + b * s.steps * s.out_channels,
                     dx.data() + b * s.steps * s.in_channels, s);
    }
  }
  if (!dw.empty()) {
    for (std::size_t r = 0; r < s.taps * s.in_channels; ++r) {
      conv_dw_row(x.data(), dy.data(), dw.data() + r * s.out_channels, r / s.in_channels,
                  r % s.in_channels, s);
    }
  }
  if (!dbias.empty()) conv_dbias(dy.data(), dbias.data(), s);
}

}  // namespace serial

// -------------------------------------------------------------- parallel

namespace parallel {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    gemm_row(a.data() + i * k, b.data(), c.data() + i * n, k, n, accumulate);
  }
}

void gemm_bt(std::span<const double> dc, std::span<const double> b, std::span<double> da,
             std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(m); ++i) {
    gemm_bt_row(dc.data() + i * n, b.data(), da.data() + i * k, k, n);
  }
}

void gemm_at(std::span<const double> a, std::span<const double> dc, std::span<double> db,
             std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (Index t = 0; t < static_cast<Index>(k); ++t) {
    gemm_at_row(a.data(), dc.data(), db.data() + t * n, static_cast<std::size_t>(t), m, k, n);
  }
}

void causal_conv(std::span<const double> x, std::span<const double> w,
                 std::span<const double> bias, std::span<double> y, const ConvShape& s) {
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < static_cast<Index>(s.batch); ++b) {
    conv_sample(x.data() + b * s.steps * s.in_channels, w.data(), bias.data(),
                y.data() + b * s.steps * s.out_channels, s);
  }
}

void causal_conv_backward(std::span<const double> x, std::span<const double> w,
                          std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                          std::span<double> dbias, const ConvShape& s) {
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (Index b = 0; b < static_cast<Index>(s.batch); ++b) {
      conv_dx_sample(w.data(), dy.data() + b * s.steps * s.out_channels,
                     dx.data() + b * s.steps * s.in_channels, s);
    }
  }
  if (!dw.empty()) {
    const auto rows = static_cast<Index>(s.taps * s.in_channels);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
      const auto ur = static_cast<std::size_t>(r);
      conv_dw_row(x.data(), dy.data(), dw.data() + ur * s.out_channels, ur / s.in_channels,
                  ur % s.in_channels, s);
    }
  }
  if (!dbias.empty()) conv_dbias(dy.data(), dbias.data(), s);
}

}  // namespace parallel

// -------------------------------------------------------------- dispatch

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (use_parallel(m * k * n)) {
    parallel::gemm(a, b, c, m, k, n, accumulate);
  } else {
    serial::gemm(a, b, c, m, k, n, accumulate);
  }
}

void gemm_bt(std::span<const double> dc, std::span<const double> b, std::span<double> da,
             std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m * k * n)) {
    parallel::gemm_bt(dc, b, da, m, k, n);
  } else {
    serial::gemm_bt(dc, b, da, m, k, n);
  }
}

void gemm_at(std::span<const double> a, std::span<const double> dc, std::span<double> db,
             std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m * k * n)) {
    parallel::gemm_at(a, dc, db, m, k, n);
  } else {
    serial::gemm_at(a, dc, db, m, k, n);
  }
}

void causal_conv(std::span<const double> x, std::span<const double> w,
                 std::span<const double> bias, std::span<double> y, const ConvShape& s) {
  if (use_parallel(s.batch * s.steps * s.taps * s.in_channels * s.out_channels)) {
    parallel::causal_conv(x, w, bias, y, s);
  } else {
    serial::causal_conv(x, w, bias, y, s);
  }
}

void causal_conv_backward(std::span<const double> x, std::span<const double> w,
                          std::span<const double> dy, std::span<double> dx, std::span<double> dw,
                          std::span<double> dbias, const ConvShape& s) {
  if (use_parallel(s.batch * s.steps * s.taps * s.in_channels * s.out_channels)) {
    parallel::causal_conv_backward(x, w, dy, dx, dw, dbias, s);
  } else {
    serial::causal_conv_backward(x, w, dy, dx, dw, dbias, s);
  }
}

}  // namespace hecto::kernels
