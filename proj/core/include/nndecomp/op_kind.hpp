// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace nnd {

/// Operator kinds. Every kind except BatchNorm is also a classifier label;
/// BatchNorm only exists in source models (codegen either folds it or
/// decomposes it into arithmetic kernels).
enum class OpKind {
  Conv,
  Dense,
  BiasAdd,
  Add,
  ReLU,
  MaxPool,
  AvgPool,
  LRN,
  Softmax,
  Embedding,
  Reshape,
  Transpose,
  Flatten,
  ExpandDims,
  Concat,
  Split,
  InsertTensor,
  Sqrt,
  Divide,
  Multiply,
  Negative,
  BatchNorm,
};

inline constexpr std::size_t kNumLabels = 21;

/// Fixed label registry, index == bit position in an OperatorLabelVec.
const std::array<OpKind, kNumLabels>& label_registry();
std::optional<std::size_t> label_index(OpKind kind);

std::string_view kind_name(OpKind kind);
std::optional<OpKind> parse_kind(std::string_view name);

/// Codegen-inserted layout kernels; recorded during recovery but dropped when
/// the model is rebuilt.
bool is_layout_utility(OpKind kind);

/// Kinds whose semantics are per-element (no dimensions to recover).
bool is_elementwise(OpKind kind);

/// Orders the labels of a fused kernel the way the fused computation runs:
/// the anchor operator first, then BiasAdd, then ReLU.
std::vector<OpKind> fused_order(std::vector<OpKind> kinds);

}  // namespace nnd
