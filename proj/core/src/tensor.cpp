// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/tensor.hpp"

#include <cstring>

#include "nndecomp/error.hpp"

namespace nnd {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (auto d : shape_)
    if (d < 0) fail(ErrorCode::ShapeMismatch, "negative dimension in " + shape_str(shape_));
  data_.assign(static_cast<std::size_t>(nnd::numel(shape_)), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (nnd::numel(shape_) != static_cast<std::int64_t>(data_.size()))
    fail(ErrorCode::TensorSizeMismatch, "shape " + shape_str(shape_) + " needs " +
                                            std::to_string(nnd::numel(shape_)) + " values, got " +
                                            std::to_string(data_.size()));
}

bool Tensor::bit_equal(const Tensor& other) const {
  return shape_ == other.shape_ && data_.size() == other.data_.size() &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

}  // namespace nnd
