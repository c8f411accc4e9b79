// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nnd {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major f32 tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const noexcept { return shape_; }
  std::int64_t numel() const noexcept { return static_cast<std::int64_t>(data_.size()); }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  /// Bitwise equality of shape and values.
  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<float> data_;
};

}  // namespace nnd
