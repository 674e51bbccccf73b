// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slicekit/layer.hpp"
#include "slicekit/tensor.hpp"

namespace slicekit {

// Ordered sequence of top-level units. A Block is one unit; nothing is ever
// split inside it.
struct LayerGraph {
  std::string name;
  Shape input_shape;
  std::vector<Layer> layers;

  std::size_t size() const noexcept { return layers.size(); }
  friend bool operator==(const LayerGraph&, const LayerGraph&) = default;
};

enum class SplitKind { kFullOffload, kInterior, kLocalOnly };

// Device runs units [0, index], edge runs (index, n). FullOffload uses
// index -1 and LocalOnly index n-1.
struct SplitPoint {
  SplitKind kind = SplitKind::kInterior;
  int index = 0;
  bool tl_eligible = false;
  Shape output_shape;
  // Wire frame size of the tensor crossing the boundary; 0 for LocalOnly.
  std::uint64_t output_bytes = 0;
};

struct UnitShape {
  int layer_id;
  Shape output_shape;
  std::uint64_t output_bytes;
};

const char* split_kind_name(SplitKind k);

// Throws ShapeError naming the offending unit.
std::vector<UnitShape> propagate_shapes(const LayerGraph& graph);
// Validates weights as well as shapes. Throws ShapeError / MissingWeights.
void validate(const LayerGraph& graph);

std::vector<SplitPoint> enumerate_split_points(const LayerGraph& graph);
SplitPoint split_point_at(const LayerGraph& graph, int index);

// Units [begin, end) as a graph of their own, input shape propagated.
LayerGraph slice(const LayerGraph& graph, int begin, int end, std::string name);
LayerGraph head_of(const LayerGraph& graph, int split_index);
LayerGraph tail_of(const LayerGraph& graph, int split_index);

Tensor run(const LayerGraph& graph, const Tensor& input);
Tensor run_units(const LayerGraph& graph, int begin, int end, const Tensor& input);

// Text model format plus companion SLKW weight file.
LayerGraph load_model(const std::filesystem::path& path);
LayerGraph parse_model(const std::string& text, const std::filesystem::path& base_dir);
// Writes `<dir>/<stem>.model` and `<dir>/<stem>.bin`; returns the model path.
std::filesystem::path save_model(const LayerGraph& graph, const std::filesystem::path& dir,
                                 const std::string& stem);
std::string format_model(const LayerGraph& graph, const std::string& weights_file);

// Key identifying a parameterised layer in the weight file: unit id in the
// high bits, 1-based block member index in the low 8 bits (0 at top level).
std::uint32_t weight_key(int unit, int member);

std::vector<std::uint8_t> encode_weights(const LayerGraph& graph);
void decode_weights(std::span<const std::uint8_t> blob, LayerGraph& graph);

const std::vector<std::string>& synthetic_model_names();
LayerGraph make_synthetic_model(const std::string& name, std::uint64_t seed);
// He-normal weights and zero biases for every parameterised layer.
void init_weights(LayerGraph& graph, std::uint64_t seed);

}  // namespace slicekit
