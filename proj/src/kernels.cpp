// SPDX-License-Identifier: Apache-2.0
#include "slicekit/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstddef>

#include "slicekit/error.hpp"

namespace slicekit::kernels {
namespace {

std::atomic<int> g_threads{1};

}  // namespace

Shape conv2d_output_shape(Shape in, const ConvParams& p) {
  if (p.kernel == 0 || p.stride == 0 || p.out_channels == 0) {
    throw ShapeError("conv2d parameters must be positive");
  }
  const std::int64_t h = std::int64_t{in.height} + 2 * p.padding;
  const std::int64_t w = std::int64_t{in.width} + 2 * p.padding;
  if (h < p.kernel || w < p.kernel) {
    throw ShapeError("conv2d kernel " + std::to_string(p.kernel) + " larger than padded input " +
                     in.str());
  }
  return {p.out_channels, static_cast<std::uint32_t>((h - p.kernel) / p.stride + 1),
          static_cast<std::uint32_t>((w - p.kernel) / p.stride + 1)};
}

Shape pool_output_shape(Shape in, std::uint32_t kernel, std::uint32_t stride) {
  if (kernel == 0 || stride == 0) throw ShapeError("pool parameters must be positive");
  if (in.height < kernel || in.width < kernel) {
    throw ShapeError("pool window " + std::to_string(kernel) + " larger than input " + in.str());
  }
  return {in.channels, (in.height - kernel) / stride + 1, (in.width - kernel) / stride + 1};
}

void set_num_threads(int n) { g_threads.store(std::max(1, n)); }
int num_threads() { return g_threads.load(); }

void conv2d(std::span<const float> in, Shape s, std::span<const float> weights,
            std::span<const float> bias, const ConvParams& p, std::span<float> out) {
  const Shape o = conv2d_output_shape(s, p);
  const std::int64_t k = p.kernel;
  const std::int64_t pad = p.padding;
  const int threads = num_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t oc = 0; oc < o.channels; ++oc) {
    const float* wc = weights.data() + oc * s.channels * k * k;
    float* dst = out.data() + oc * o.height * o.width;
    for (std::int64_t oy = 0; oy < o.height; ++oy) {
      for (std::int64_t ox = 0; ox < o.width; ++ox) {
        float acc = bias[oc];
        const std::int64_t y0 = oy * p.stride - pad;
        const std::int64_t x0 = ox * p.stride - pad;
        for (std::int64_t ic = 0; ic < s.channels; ++ic) {
          const float* src = in.data() + ic * s.height * s.width;
          const float* wk = wc + ic * k * k;
          for (std::int64_t ky = 0; ky < k; ++ky) {
            const std::int64_t y = y0 + ky;
            if (y < 0 || y >= s.height) continue;
            for (std::int64_t kx = 0; kx < k; ++kx) {
              const std::int64_t x = x0 + kx;
              if (x < 0 || x >= s.width) continue;
              acc += wk[ky * k + kx] * src[y * s.width + x];
            }
          }
        }
        dst[oy * o.width + ox] = acc;
      }
    }
  }
}

void dense(std::span<const float> in, std::span<const float> weights, std::span<const float> bias,
           std::span<float> out) {
  const std::int64_t n_in = static_cast<std::int64_t>(in.size());
  const std::int64_t n_out = static_cast<std::int64_t>(out.size());
  const int threads = num_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t o = 0; o < n_out; ++o) {
    const float* row = weights.data() + o * n_in;
    float acc = bias[o];
    for (std::int64_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

void relu(std::span<const float> in, std::span<float> out) {
  const std::int64_t n = static_cast<std::int64_t>(in.size());
  const int threads = num_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1 && n > 4096)
  for (std::int64_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
}

void max_pool(std::span<const float> in, Shape s, std::uint32_t kernel, std::uint32_t stride,
              std::span<float> out) {
  const Shape o = pool_output_shape(s, kernel, stride);
  const int threads = num_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t c = 0; c < o.channels; ++c) {
    const float* src = in.data() + c * s.height * s.width;
    float* dst = out.data() + c * o.height * o.width;
    for (std::int64_t oy = 0; oy < o.height; ++oy) {
      for (std::int64_t ox = 0; ox < o.width; ++ox) {
        const float* win = src + oy * stride * s.width + ox * stride;
        float best = win[0];
        for (std::uint32_t ky = 0; ky < kernel; ++ky) {
          for (std::uint32_t kx = 0; kx < kernel; ++kx) {
            best = std::max(best, win[ky * s.width + kx]);
          }
        }
        dst[oy * o.width + ox] = best;
      }
    }
  }
}

void upsample_nearest_2x(std::span<const float> in, Shape s, std::span<float> out) {
  const std::int64_t ow = 2 * std::int64_t{s.width};
  const std::int64_t oh = 2 * std::int64_t{s.height};
  const int threads = num_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t c = 0; c < s.channels; ++c) {
    const float* src = in.data() + c * s.height * s.width;
    float* dst = out.data() + c * oh * ow;
    for (std::int64_t y = 0; y < oh; ++y) {
      const float* row = src + (y / 2) * s.width;
      for (std::int64_t x = 0; x < ow; ++x) dst[y * ow + x] = row[x / 2];
    }
  }
}

void global_avg_pool(std::span<const float> in, Shape s, std::span<float> out) {
  const std::int64_t plane = std::int64_t{s.height} * s.width;
  const int threads = num_threads();
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t c = 0; c < s.channels; ++c) {
    const float* src = in.data() + c * plane;
    float acc = 0.0f;
    for (std::int64_t i = 0; i < plane; ++i) acc += src[i];
    out[c] = acc / static_cast<float>(plane);
  }
}

namespace serial {

void conv2d(std::span<const float> in, Shape s, std::span<const float> weights,
            std::span<const float> bias, const ConvParams& p, std::span<float> out) {
  const Shape o = conv2d_output_shape(s, p);
  const int k = static_cast<int>(p.kernel);
  for (std::uint32_t oc = 0; oc < o.channels; ++oc) {
    for (std::uint32_t oy = 0; oy < o.height; ++oy) {
      for (std::uint32_t ox = 0; ox < o.width; ++ox) {
        float acc = bias[oc];
        for (std::uint32_t ic = 0; ic < s.channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const long y = static_cast<long>(oy * p.stride) - p.padding + ky;
              const long x = static_cast<long>(ox * p.stride) - p.padding + kx;
              if (y < 0 || x < 0 || y >= static_cast<long>(s.height) ||
                  x >= static_cast<long>(s.width)) {
                continue;
              }
              const std::size_t wi = ((std::size_t{oc} * s.channels + ic) * k + ky) * k + kx;
              const std::size_t xi = (std::size_t{ic} * s.height + y) * s.width + x;
              acc += weights[wi] * in[xi];
            }
          }
        }
        out[(std::size_t{oc} * o.height + oy) * o.width + ox] = acc;
      }
    }
  }
}

void dense(std::span<const float> in, std::span<const float> weights, std::span<const float> bias,
           std::span<float> out) {
  for (std::size_t o = 0; o < out.size(); ++o) {
    float acc = bias[o];
    for (std::size_t i = 0; i < in.size(); ++i) acc += weights[o * in.size() + i] * in[i];
    out[o] = acc;
  }
}

void relu(std::span<const float> in, std::span<float> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::max(in[i], 0.0f);
}

void max_pool(std::span<const float> in, Shape s, std::uint32_t kernel, std::uint32_t stride,
              std::span<float> out) {
  const Shape o = pool_output_shape(s, kernel, stride);
  for (std::uint32_t c = 0; c < s.channels; ++c) {
    for (std::uint32_t oy = 0; oy < o.height; ++oy) {
      for (std::uint32_t ox = 0; ox < o.width; ++ox) {
        float best = in[(std::size_t{c} * s.height + oy * stride) * s.width + ox * stride];
        for (std::uint32_t ky = 0; ky < kernel; ++ky) {
          for (std::uint32_t kx = 0; kx < kernel; ++kx) {
            const float v =
                in[(std::size_t{c} * s.height + oy * stride + ky) * s.width + ox * stride + kx];
            if (v > best) best = v;
          }
        }
        out[(std::size_t{c} * o.height + oy) * o.width + ox] = best;
      }
    }
  }
}

void upsample_nearest_2x(std::span<const float> in, Shape s, std::span<float> out) {
  for (std::uint32_t c = 0; c < s.channels; ++c) {
    for (std::uint32_t y = 0; y < 2 * s.height; ++y) {
      for (std::uint32_t x = 0; x < 2 * s.width; ++x) {
        out[(std::size_t{c} * 2 * s.height + y) * 2 * s.width + x] =
            in[(std::size_t{c} * s.height + y / 2) * s.width + x / 2];
      }
    }
  }
}

void global_avg_pool(std::span<const float> in, Shape s, std::span<float> out) {
  const std::size_t plane = std::size_t{s.height} * s.width;
  for (std::uint32_t c = 0; c < s.channels; ++c) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < plane; ++i) acc += in[c * plane + i];
    out[c] = acc / static_cast<float>(plane);
  }
}

}  // namespace serial
}  // namespace slicekit::kernels
