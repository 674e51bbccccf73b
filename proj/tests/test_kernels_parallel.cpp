// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "slicekit/kernels.hpp"
#include "test_util.hpp"

namespace slicekit {
namespace {

// Parallel kernels must reproduce the serial reference bit for bit at any
// thread count.
class ParallelKernels : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { kernels::set_num_threads(GetParam()); }
  void TearDown() override { kernels::set_num_threads(1); }
  Rng rng{42};
};

std::vector<float> random_vector(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return v;
}

TEST_P(ParallelKernels, Conv2d) {
  for (const kernels::ConvParams p : {kernels::ConvParams{16, 3, 1, 1}, kernels::ConvParams{7, 3, 2, 0},
                                      kernels::ConvParams{5, 1, 1, 0}}) {
    const Shape in{6, 13, 11};
    const Shape out = kernels::conv2d_output_shape(in, p);
    const auto x = random_vector(in.elements(), rng);
    const auto w = random_vector(std::size_t{p.out_channels} * in.channels * p.kernel * p.kernel, rng);
    const auto b = random_vector(p.out_channels, rng);
    std::vector<float> a(out.elements()), s(out.elements());
    kernels::conv2d(x, in, w, b, p, a);
    kernels::serial::conv2d(x, in, w, b, p, s);
    EXPECT_EQ(a, s);
  }
}

TEST_P(ParallelKernels, Dense) {
  const auto x = random_vector(300, rng);
  const auto w = random_vector(300 * 17, rng);
  const auto b = random_vector(17, rng);
  std::vector<float> a(17), s(17);
  kernels::dense(x, w, b, a);
  kernels::serial::dense(x, w, b, s);
  EXPECT_EQ(a, s);
}

TEST_P(ParallelKernels, ElementwiseAndPooling) {
  const Shape in{9, 12, 10};
  const auto x = random_vector(in.elements(), rng);
  std::vector<float> a(in.elements()), s(in.elements());
  kernels::relu(x, a);
  kernels::serial::relu(x, s);
  EXPECT_EQ(a, s);

  const Shape pooled = kernels::pool_output_shape(in, 2, 2);
  a.assign(pooled.elements(), 0);
  s.assign(pooled.elements(), 0);
  kernels::max_pool(x, in, 2, 2, a);
  kernels::serial::max_pool(x, in, 2, 2, s);
  EXPECT_EQ(a, s);

  a.assign(in.elements() * 4, 0);
  s.assign(in.elements() * 4, 0);
  kernels::upsample_nearest_2x(x, in, a);
  kernels::serial::upsample_nearest_2x(x, in, s);
  EXPECT_EQ(a, s);

  a.assign(in.channels, 0);
  s.assign(in.channels, 0);
  kernels::global_avg_pool(x, in, a);
  kernels::serial::global_avg_pool(x, in, s);
  EXPECT_EQ(a, s);
}

INSTANTIATE_TEST_SUITE_P(Threads, ParallelKernels, ::testing::Values(1, 2, 4));

}  // namespace
}  // namespace slicekit
