// SPDX-License-Identifier: Apache-2.0
#include "slicekit/layer.hpp"

#include <type_traits>

#include "slicekit/error.hpp"
#include "slicekit/kernels.hpp"

namespace slicekit {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

kernels::ConvParams conv_params(const Conv2D& c) {
  return {c.out_channels, c.kernel, c.stride, c.padding};
}

void check_input(const Layer& layer, const Tensor& input) {
  const std::size_t expected = weight_count(layer.kind, input.shape());
  if (layer.weights.size() != expected) {
    throw ShapeMismatch(kind_name(layer.kind) + " expects " + std::to_string(expected) +
                        " weights for input " + input.shape().str() + ", has " +
                        std::to_string(layer.weights.size()));
  }
}

void check_upstream(const Layer& layer, const Tensor& input, const Tensor& upstream) {
  const Shape out = output_shape(layer, input.shape());
  if (!(upstream.shape() == out)) {
    throw ShapeMismatch(kind_name(layer.kind) + " upstream gradient expected " + out.str() +
                        ", got " + upstream.shape().str());
  }
}

Tensor max_pool_backward(const Tensor& input, const Tensor& upstream, std::uint32_t kernel,
                         std::uint32_t stride) {
  const Shape s = input.shape();
  const Shape o = upstream.shape();
  Tensor grad(s);
  for (std::uint32_t c = 0; c < s.channels; ++c) {
    for (std::uint32_t oy = 0; oy < o.height; ++oy) {
      for (std::uint32_t ox = 0; ox < o.width; ++ox) {
        std::uint32_t by = oy * stride;
        std::uint32_t bx = ox * stride;
        float best = input.at(c, by, bx);
        for (std::uint32_t ky = 0; ky < kernel; ++ky) {
          for (std::uint32_t kx = 0; kx < kernel; ++kx) {
            const float v = input.at(c, oy * stride + ky, ox * stride + kx);
            if (v > best) {
              best = v;
              by = oy * stride + ky;
              bx = ox * stride + kx;
            }
          }
        }
        grad.at(c, by, bx) += upstream.at(c, oy, ox);
      }
    }
  }
  return grad;
}

}  // namespace

bool operator==(const Block& a, const Block& b) { return a.layers == b.layers; }

std::string kind_name(const LayerKind& kind) {
  return std::visit(Overloaded{
                        [](const Conv2D&) { return std::string("conv2d"); },
                        [](const Dense&) { return std::string("dense"); },
                        [](const ReLU&) { return std::string("relu"); },
                        [](const MaxPool&) { return std::string("maxpool"); },
                        [](const GlobalAvgPool&) { return std::string("gap"); },
                        [](const Flatten&) { return std::string("flatten"); },
                        [](const DeviceTL&) { return std::string("device_tl"); },
                        [](const EdgeTL&) { return std::string("edge_tl"); },
                        [](const Block&) { return std::string("block"); },
                    },
                    kind);
}

bool has_weights(const LayerKind& kind) {
  return std::holds_alternative<Conv2D>(kind) || std::holds_alternative<Dense>(kind);
}

bool is_transfer_layer(const LayerKind& kind) {
  return std::holds_alternative<DeviceTL>(kind) || std::holds_alternative<EdgeTL>(kind);
}

Shape output_shape(const Layer& layer, Shape in) {
  if (in.elements() == 0) throw ShapeError("empty input shape " + in.str());
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) { return kernels::conv2d_output_shape(in, conv_params(c)); },
          [&](const Dense& d) {
            if (in.height != 1 || in.width != 1) {
              throw ShapeError("dense expects a flattened Cx1x1 input, got " + in.str());
            }
            if (d.out_units == 0) throw ShapeError("dense needs at least one unit");
            return Shape{d.out_units, 1, 1};
          },
          [&](const ReLU&) { return in; },
          [&](const MaxPool& p) { return kernels::pool_output_shape(in, p.kernel, p.stride); },
          [&](const GlobalAvgPool&) { return Shape{in.channels, 1, 1}; },
          [&](const Flatten&) {
            return Shape{static_cast<std::uint32_t>(in.elements()), 1, 1};
          },
          [&](const DeviceTL&) {
            if (!in.spatial_even()) {
              throw OddSpatialDims("transfer layer needs even spatial dims, got " + in.str());
            }
            return Shape{in.channels, in.height / 2, in.width / 2};
          },
          [&](const EdgeTL&) { return Shape{in.channels, in.height * 2, in.width * 2}; },
          [&](const Block& b) {
            if (b.layers.size() < 2) throw ShapeError("block needs at least two sub-layers");
            Shape s = in;
            for (const Layer& l : b.layers) s = output_shape(l, s);
            return s;
          },
      },
      layer.kind);
}

std::size_t weight_count(const LayerKind& kind, Shape in) {
  if (const auto* c = std::get_if<Conv2D>(&kind)) {
    return std::size_t{c->out_channels} * in.channels * c->kernel * c->kernel + c->out_channels;
  }
  if (const auto* d = std::get_if<Dense>(&kind)) {
    return std::size_t{d->out_units} * in.elements() + d->out_units;
  }
  return 0;
}

Tensor max_pool_2x2(const Tensor& input) {
  const Shape s = input.shape();
  if (s.height % 2 != 0 || s.width % 2 != 0) {
    throw OddSpatialDims("2x2 max pool needs even spatial dims, got " + s.str());
  }
  Tensor out(Shape{s.channels, s.height / 2, s.width / 2});
  kernels::max_pool(input.data(), s, 2, 2, out.data());
  return out;
}

Tensor nn_upsample_2x(const Tensor& input) {
  const Shape s = input.shape();
  Tensor out(Shape{s.channels, s.height * 2, s.width * 2});
  kernels::upsample_nearest_2x(input.data(), s, out.data());
  return out;
}

Tensor forward(const Layer& layer, const Tensor& input) {
  check_input(layer, input);
  const Shape in = input.shape();
  const Shape out_shape = output_shape(layer, in);
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) {
            Tensor out(out_shape);
            const std::size_t nw = layer.weights.size() - c.out_channels;
            const std::span<const float> w(layer.weights);
            kernels::conv2d(input.data(), in, w.first(nw), w.subspan(nw), conv_params(c),
                            out.data());
            return out;
          },
          [&](const Dense& d) {
            Tensor out(out_shape);
            const std::size_t nw = layer.weights.size() - d.out_units;
            const std::span<const float> w(layer.weights);
            kernels::dense(input.data(), w.first(nw), w.subspan(nw), out.data());
            return out;
          },
          [&](const ReLU&) {
            Tensor out(out_shape);
            kernels::relu(input.data(), out.data());
            return out;
          },
          [&](const MaxPool& p) {
            Tensor out(out_shape);
            kernels::max_pool(input.data(), in, p.kernel, p.stride, out.data());
            return out;
          },
          [&](const GlobalAvgPool&) {
            Tensor out(out_shape);
            kernels::global_avg_pool(input.data(), in, out.data());
            return out;
          },
          [&](const Flatten&) { return Tensor(out_shape, input.values()); },
          [&](const DeviceTL&) { return max_pool_2x2(input); },
          [&](const EdgeTL&) { return nn_upsample_2x(input); },
          [&](const Block& b) {
            Tensor x = input;
            for (const Layer& l : b.layers) x = forward(l, x);
            return x;
          },
      },
      layer.kind);
}

LayerGradients backward(const Layer& layer, const Tensor& input, const Tensor& upstream) {
  check_input(layer, input);
  check_upstream(layer, input, upstream);
  const Shape s = input.shape();
  const Shape o = upstream.shape();
  return std::visit(
      Overloaded{
          [&](const Conv2D& c) {
            LayerGradients g{Tensor(s), {std::vector<float>(layer.weights.size(), 0.0f)}};
            std::vector<float>& dw = g.weights[0];
            const std::size_t k = c.kernel;
            const std::size_t bias_at = layer.weights.size() - c.out_channels;
            for (std::uint32_t oc = 0; oc < o.channels; ++oc) {
              for (std::uint32_t oy = 0; oy < o.height; ++oy) {
                for (std::uint32_t ox = 0; ox < o.width; ++ox) {
                  const float dy = upstream.at(oc, oy, ox);
                  dw[bias_at + oc] += dy;
                  for (std::uint32_t ic = 0; ic < s.channels; ++ic) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                      const long y = static_cast<long>(oy * c.stride + ky) - c.padding;
                      if (y < 0 || y >= static_cast<long>(s.height)) continue;
                      for (std::size_t kx = 0; kx < k; ++kx) {
                        const long x = static_cast<long>(ox * c.stride + kx) - c.padding;
                        if (x < 0 || x >= static_cast<long>(s.width)) continue;
                        const std::size_t wi = ((std::size_t{oc} * s.channels + ic) * k + ky) * k + kx;
                        dw[wi] += dy * input.at(ic, y, x);
                        g.input.at(ic, y, x) += dy * layer.weights[wi];
                      }
                    }
                  }
                }
              }
            }
            return g;
          },
          [&](const Dense& d) {
            LayerGradients g{Tensor(s), {std::vector<float>(layer.weights.size(), 0.0f)}};
            std::vector<float>& dw = g.weights[0];
            const std::size_t n_in = s.elements();
            const std::size_t bias_at = std::size_t{d.out_units} * n_in;
            const auto x = input.data();
            auto dx = g.input.data();
            for (std::size_t out = 0; out < d.out_units; ++out) {
              const float dy = upstream.data()[out];
              dw[bias_at + out] += dy;
              for (std::size_t i = 0; i < n_in; ++i) {
                dw[out * n_in + i] += dy * x[i];
                dx[i] += dy * layer.weights[out * n_in + i];
              }
            }
            return g;
          },
          [&](const ReLU&) {
            LayerGradients g{Tensor(s), {}};
            for (std::size_t i = 0; i < input.size(); ++i) {
              g.input.data()[i] = input.data()[i] > 0.0f ? upstream.data()[i] : 0.0f;
            }
            return g;
          },
          [&](const MaxPool& p) {
            return LayerGradients{max_pool_backward(input, upstream, p.kernel, p.stride), {}};
          },
          [&](const GlobalAvgPool&) {
            LayerGradients g{Tensor(s), {}};
            const float inv = 1.0f / static_cast<float>(std::size_t{s.height} * s.width);
            for (std::uint32_t c = 0; c < s.channels; ++c) {
              const float share = upstream.data()[c] * inv;
              for (std::uint32_t y = 0; y < s.height; ++y) {
                for (std::uint32_t x = 0; x < s.width; ++x) g.input.at(c, y, x) = share;
              }
            }
            return g;
          },
          [&](const Flatten&) { return LayerGradients{Tensor(s, upstream.values()), {}}; },
          [&](const DeviceTL&) {
            return LayerGradients{max_pool_backward(input, upstream, 2, 2), {}};
          },
          [&](const EdgeTL&) {
            LayerGradients g{Tensor(s), {}};
            for (std::uint32_t c = 0; c < o.channels; ++c) {
              for (std::uint32_t y = 0; y < o.height; ++y) {
                for (std::uint32_t x = 0; x < o.width; ++x) {
                  g.input.at(c, y / 2, x / 2) += upstream.at(c, y, x);
                }
              }
            }
            return g;
          },
          [&](const Block& b) {
            std::vector<Tensor> acts{input};
            for (std::size_t i = 0; i + 1 < b.layers.size(); ++i) {
              acts.push_back(forward(b.layers[i], acts.back()));
            }
            std::vector<std::vector<std::vector<float>>> per_layer(b.layers.size());
            Tensor grad = upstream;
            for (std::size_t i = b.layers.size(); i-- > 0;) {
              LayerGradients lg = backward(b.layers[i], acts[i], grad);
              grad = std::move(lg.input);
              per_layer[i] = std::move(lg.weights);
            }
            LayerGradients g{std::move(grad), {}};
            for (auto& w : per_layer) {
              for (auto& blk : w) g.weights.push_back(std::move(blk));
            }
            return g;
          },
      },
      layer.kind);
}

namespace {

void collect_blocks(Layer& layer, std::vector<std::span<float>>& out) {
  if (auto* b = std::get_if<Block>(&layer.kind)) {
    for (Layer& l : b->layers) collect_blocks(l, out);
  } else if (has_weights(layer.kind)) {
    out.emplace_back(layer.weights);
  }
}

void collect_blocks(const Layer& layer, std::vector<std::span<const float>>& out) {
  if (const auto* b = std::get_if<Block>(&layer.kind)) {
    for (const Layer& l : b->layers) collect_blocks(l, out);
  } else if (has_weights(layer.kind)) {
    out.emplace_back(layer.weights);
  }
}

}  // namespace

std::vector<std::span<float>> parameter_blocks(Layer& layer) {
  std::vector<std::span<float>> out;
  collect_blocks(layer, out);
  return out;
}

std::vector<std::span<const float>> parameter_blocks(const Layer& layer) {
  std::vector<std::span<const float>> out;
  collect_blocks(layer, out);
  return out;
}

}  // namespace slicekit
