// SPDX-License-Identifier: Apache-2.0
#include "slicekit/tensor.hpp"

#include <cmath>
#include <cstring>

#include "slicekit/error.hpp"

namespace slicekit {

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" +
         std::to_string(width);
}

Tensor::Tensor(Shape shape) : shape_(shape), data_(shape.elements(), 0.0f) {
  if (shape.elements() == 0) throw ShapeMismatch("tensor dims must be positive, got " + shape.str());
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (shape.elements() == 0) throw ShapeMismatch("tensor dims must be positive, got " + shape.str());
  if (data_.size() != shape.elements()) {
    throw ShapeMismatch("expected " + std::to_string(shape.elements()) + " values for " +
                        shape.str() + ", got " + std::to_string(data_.size()));
  }
}

bool Tensor::all_finite() const noexcept {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ &&
         (a.data_.empty() ||
          std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
}

}  // namespace slicekit
