// SPDX-License-Identifier: Apache-2.0
// Serial reference kernels against the OpenMP ones.
// Run: bench_kernels --benchmark_filter=conv

#include <benchmark/benchmark.h>

#include <vector>

#include "slicekit/kernels.hpp"
#include "slicekit/random.hpp"

namespace {

using namespace slicekit;
namespace k = slicekit::kernels;

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

// Arg(0) is the thread count; 0 selects the serial reference.
void set_threads(const benchmark::State& state) {
  if (state.range(0) > 0) k::set_num_threads(static_cast<int>(state.range(0)));
}

void BM_Conv2d(benchmark::State& state) {
  const Shape in{32, 32, 32};
  const k::ConvParams p{64, 3, 1, 1};
  const auto x = noise(in.elements(), 1);
  const auto w = noise(std::size_t{64} * 32 * 9, 2);
  const auto b = noise(64, 3);
  std::vector<float> out(k::conv2d_output_shape(in, p).elements());
  set_threads(state);
  for (auto _ : state) {
    if (state.range(0) == 0) {
      k::serial::conv2d(x, in, w, b, p, out);
    } else {
      k::conv2d(x, in, w, b, p, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

void BM_Dense(benchmark::State& state) {
  const std::size_t n_in = 4096, n_out = 1024;
  const auto x = noise(n_in, 1);
  const auto w = noise(n_in * n_out, 2);
  const auto b = noise(n_out, 3);
  std::vector<float> out(n_out);
  set_threads(state);
  for (auto _ : state) {
    if (state.range(0) == 0) {
      k::serial::dense(x, w, b, out);
    } else {
      k::dense(x, w, b, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_MaxPool(benchmark::State& state) {
  const Shape in{64, 128, 128};
  const auto x = noise(in.elements(), 1);
  std::vector<float> out(k::pool_output_shape(in, 2, 2).elements());
  set_threads(state);
  for (auto _ : state) {
    if (state.range(0) == 0) {
      k::serial::max_pool(x, in, 2, 2, out);
    } else {
      k::max_pool(x, in, 2, 2, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(x.size() * sizeof(float)));
}

void BM_Upsample(benchmark::State& state) {
  const Shape in{64, 64, 64};
  const auto x = noise(in.elements(), 1);
  std::vector<float> out(in.elements() * 4);
  set_threads(state);
  for (auto _ : state) {
    if (state.range(0) == 0) {
      k::serial::upsample_nearest_2x(x, in, out);
    } else {
      k::upsample_nearest_2x(x, in, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(out.size() * sizeof(float)));
}

void threads(benchmark::internal::Benchmark* b) {
  for (int t : {0, 1, 2, 4, 8}) b->Arg(t);
  b->ArgName("threads")->UseRealTime();
}

BENCHMARK(BM_Conv2d)->Apply(threads);
BENCHMARK(BM_Dense)->Apply(threads);
BENCHMARK(BM_MaxPool)->Apply(threads);
BENCHMARK(BM_Upsample)->Apply(threads);

}  // namespace

BENCHMARK_MAIN();
