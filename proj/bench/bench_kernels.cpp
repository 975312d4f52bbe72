// SPDX-License-Identifier: Apache-2.0
// Serial reference kernels against their OpenMP counterparts, plus a full
// chunked evaluation under both dispatch policies.
#include <benchmark/benchmark.h>

#include <vector>

#include "hecto/kernels.hpp"
#include "hecto/rng.hpp"
#include "hecto/tasks.hpp"
#include "hecto/trainer.hpp"

namespace {

using namespace hecto;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::gemm(a, b, c, n, n, n, false);
    } else {
      kernels::serial::gemm(a, b, c, n, n, n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <bool Parallel>
void BM_CausalConv(benchmark::State& state) {
  const kernels::ConvShape s{.batch = static_cast<std::size_t>(state.range(0)),
                             .steps = 16,
                             .in_channels = 16,
                             .out_channels = 16,
                             .taps = 3,
                             .dilation = 2};
  const auto x = random_vector(s.batch * s.steps * s.in_channels, 3);
  const auto w = random_vector(s.taps * s.in_channels * s.out_channels, 4);
  const auto bias = random_vector(s.out_channels, 5);
  std::vector<double> y(s.batch * s.steps * s.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::causal_conv(x, w, bias, y, s);
    } else {
      kernels::serial::causal_conv(x, w, bias, y, s);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <kernels::Policy P>
void BM_Evaluate(benchmark::State& state) {
  kernels::PolicyScope scope(P);
  ModelConfig cfg;
  HectoModel model(cfg, 1);
  const auto data = gen_mixed(static_cast<std::size_t>(state.range(0)), 0.5, 7);
  for (auto _ : state) {
    auto r = evaluate(model, data, 64);
    benchmark::DoNotOptimize(r.metrics.accuracy);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * data.size()));
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_CausalConv<false>)->Name("causal_conv/serial")->Arg(16)->Arg(256);
BENCHMARK(BM_CausalConv<true>)->Name("causal_conv/parallel")->Arg(16)->Arg(256);
BENCHMARK(BM_Evaluate<kernels::Policy::serial>)->Name("evaluate/serial")->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Evaluate<kernels::Policy::parallel>)->Name("evaluate/parallel")->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
