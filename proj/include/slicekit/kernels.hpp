// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "slicekit/tensor.hpp"

// Forward kernels for the layer set. The top-level functions are OpenMP
// parallel over output channels; kernels::serial holds the plain-loop
// reference used by the tests and the kernel benchmark. Both accumulate in
// the same order, so their results are bit-identical for any thread count.
namespace slicekit::kernels {

struct ConvParams {
  std::uint32_t out_channels;
  std::uint32_t kernel;
  std::uint32_t stride;
  std::uint32_t padding;
};

Shape conv2d_output_shape(Shape in, const ConvParams& p);
Shape pool_output_shape(Shape in, std::uint32_t kernel, std::uint32_t stride);

// Thread count used by the parallel kernels. Defaults to 1 so timings taken
// by the benchmark module and the runtime are comparable.
void set_num_threads(int n);
int num_threads();

// weights: [out][in][k][k], bias: [out].
void conv2d(std::span<const float> in, Shape in_shape, std::span<const float> weights,
            std::span<const float> bias, const ConvParams& p, std::span<float> out);
// weights: [out][in], bias: [out].
void dense(std::span<const float> in, std::span<const float> weights,
           std::span<const float> bias, std::span<float> out);
void relu(std::span<const float> in, std::span<float> out);
void max_pool(std::span<const float> in, Shape in_shape, std::uint32_t kernel,
              std::uint32_t stride, std::span<float> out);
void upsample_nearest_2x(std::span<const float> in, Shape in_shape, std::span<float> out);
void global_avg_pool(std::span<const float> in, Shape in_shape, std::span<float> out);

namespace serial {

void conv2d(std::span<const float> in, Shape in_shape, std::span<const float> weights,
            std::span<const float> bias, const ConvParams& p, std::span<float> out);
void dense(std::span<const float> in, std::span<const float> weights,
           std::span<const float> bias, std::span<float> out);
void relu(std::span<const float> in, std::span<float> out);
void max_pool(std::span<const float> in, Shape in_shape, std::uint32_t kernel,
              std::uint32_t stride, std::span<float> out);
void upsample_nearest_2x(std::span<const float> in, Shape in_shape, std::span<float> out);
void global_avg_pool(std::span<const float> in, Shape in_shape, std::span<float> out);

}  // namespace serial
}  // namespace slicekit::kernels
