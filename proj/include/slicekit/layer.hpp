// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "slicekit/tensor.hpp"

namespace slicekit {

struct Layer;

struct Conv2D {
  std::uint32_t out_channels = 1;
  std::uint32_t kernel = 1;
  std::uint32_t stride = 1;
  std::uint32_t padding = 0;
  friend bool operator==(const Conv2D&, const Conv2D&) = default;
};
struct Dense {
  std::uint32_t out_units = 1;
  friend bool operator==(const Dense&, const Dense&) = default;
};
struct ReLU {
  friend bool operator==(const ReLU&, const ReLU&) = default;
};
struct MaxPool {
  std::uint32_t kernel = 2;
  std::uint32_t stride = 2;
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};
struct GlobalAvgPool {
  friend bool operator==(const GlobalAvgPool&, const GlobalAvgPool&) = default;
};
struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};
// Transfer-layer halves: DeviceTL is a 2x2 stride-2 unpadded max pool,
// EdgeTL a 2x nearest-neighbour upsample. Neither has parameters.
struct DeviceTL {
  friend bool operator==(const DeviceTL&, const DeviceTL&) = default;
};
struct EdgeTL {
  friend bool operator==(const EdgeTL&, const EdgeTL&) = default;
};
// Opaque slicing unit; sub-layers run in declared order.
struct Block {
  std::vector<Layer> layers;
  friend bool operator==(const Block&, const Block&);
};

using LayerKind =
    std::variant<Conv2D, Dense, ReLU, MaxPool, GlobalAvgPool, Flatten, DeviceTL, EdgeTL, Block>;

struct Layer {
  LayerKind kind;
  // Conv2D: [out][in][k][k] followed by [out] bias. Dense: [out][in] then
  // [out] bias. Empty for everything else, including Block.
  std::vector<float> weights;

  friend bool operator==(const Layer&, const Layer&) = default;
};

std::string kind_name(const LayerKind& kind);
bool has_weights(const LayerKind& kind);
bool is_transfer_layer(const LayerKind& kind);

// Shape propagation for a single layer; throws ShapeError.
Shape output_shape(const Layer& layer, Shape in);
// Parameter count of a Conv2D/Dense layer for the given input, 0 otherwise.
std::size_t weight_count(const LayerKind& kind, Shape in);

// Throws ShapeMismatch when the input or weights do not fit the layer.
Tensor forward(const Layer& layer, const Tensor& input);
// Element-wise 2x2/2 max pool. Throws OddSpatialDims on odd height or width.
Tensor max_pool_2x2(const Tensor& input);
Tensor nn_upsample_2x(const Tensor& input);

struct LayerGradients {
  Tensor input;
  // One entry per parameter block, in parameter_blocks() order.
  std::vector<std::vector<float>> weights;
};

// Gradient of a scalar loss given dLoss/dOutput. Max pool routes to the
// first maximum in row-major scan order; upsampling sums each 2x2 group.
LayerGradients backward(const Layer& layer, const Tensor& input, const Tensor& upstream);

// Mutable views over every weight vector in the layer (recursing into
// blocks), in a fixed order shared with LayerGradients::weights.
std::vector<std::span<float>> parameter_blocks(Layer& layer);
std::vector<std::span<const float>> parameter_blocks(const Layer& layer);

}  // namespace slicekit
