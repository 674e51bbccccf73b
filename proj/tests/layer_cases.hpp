// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <numeric>
#include <vector>

#include "slicekit/layer.hpp"
#include "slicekit/random.hpp"

namespace slicekit::testing {

// Distinct values at least 0.1 apart and 0.05 away from zero, so a 1e-3
// step never crosses a ReLU kink or changes a max-pool argmax.
inline Tensor spaced_input(Shape s, Rng& rng) {
  std::vector<std::size_t> order(s.elements());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<float> v(s.elements());
  const double half = static_cast<double>(v.size()) / 2.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<float>((static_cast<double>(order[i]) - half + 0.5) * 0.1);
  }
  return Tensor(s, std::move(v));
}

inline Layer with_weights(LayerKind kind, Shape in, Rng& rng) {
  Layer l{std::move(kind), {}};
  l.weights.resize(weight_count(l.kind, in));
  for (float& w : l.weights) w = static_cast<float>(rng.uniform(-0.5, 0.5));
  return l;
}

struct LayerCase {
  const char* name;
  Shape input;
  std::function<Layer(Rng&)> make;
};

inline std::vector<LayerCase> layer_cases() {
  const Shape x{1, 4, 4};
  const Shape flat{16, 1, 1};
  return {
      {"conv3x3", x, [=](Rng& r) { return with_weights(Conv2D{2, 3, 1, 1}, x, r); }},
      {"conv_strided", Shape{2, 4, 4},
       [](Rng& r) { return with_weights(Conv2D{3, 2, 2, 0}, Shape{2, 4, 4}, r); }},
      {"dense", flat, [=](Rng& r) { return with_weights(Dense{5}, flat, r); }},
      {"relu", x, [](Rng&) { return Layer{ReLU{}, {}}; }},
      {"maxpool", x, [](Rng&) { return Layer{MaxPool{2, 2}, {}}; }},
      {"gap", x, [](Rng&) { return Layer{GlobalAvgPool{}, {}}; }},
      {"flatten", x, [](Rng&) { return Layer{Flatten{}, {}}; }},
      {"device_tl", x, [](Rng&) { return Layer{DeviceTL{}, {}}; }},
      {"edge_tl", x, [](Rng&) { return Layer{EdgeTL{}, {}}; }},
      {"block", x,
       [=](Rng& r) {
         Block b;
         b.layers.push_back(with_weights(Conv2D{2, 3, 1, 1}, x, r));
         b.layers.push_back(with_weights(Conv2D{2, 1, 1, 0}, Shape{2, 4, 4}, r));
         return Layer{std::move(b), {}};
       }},
  };
}

}  // namespace slicekit::testing
