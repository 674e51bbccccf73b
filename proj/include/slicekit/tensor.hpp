// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace slicekit {

// Dims of a rank-3 feature map, channel-major.
struct Shape {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  std::size_t elements() const noexcept {
    return std::size_t{channels} * height * width;
  }
  bool spatial_even() const noexcept {
    return height % 2 == 0 && width % 2 == 0 && height >= 2 && width >= 2;
  }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense C x H x W array of 32-bit reals stored channel-major, then row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t byte_size() const noexcept { return data_.size() * sizeof(float); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::vector<float>& values() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float& at(std::uint32_t c, std::uint32_t y, std::uint32_t x) {
    return data_[(std::size_t{c} * shape_.height + y) * shape_.width + x];
  }
  float at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
    return data_[(std::size_t{c} * shape_.height + y) * shape_.width + x];
  }

  bool all_finite() const noexcept;

  // Bitwise equality of shape and values.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::vector<float> data_;
};

}  // namespace slicekit
