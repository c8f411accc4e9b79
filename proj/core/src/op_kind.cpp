// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/op_kind.hpp"

#include <algorithm>

namespace nnd {

namespace {

struct KindEntry {
  OpKind kind;
  std::string_view name;
};

constexpr std::array<KindEntry, 22> kKinds{{
    {OpKind::Conv, "Conv"},
    {OpKind::Dense, "Dense"},
    {OpKind::BiasAdd, "BiasAdd"},
    {OpKind::Add, "Add"},
    {OpKind::ReLU, "ReLU"},
    {OpKind::MaxPool, "MaxPool"},
    {OpKind::AvgPool, "AvgPool"},
    {OpKind::LRN, "LRN"},
    {OpKind::Softmax, "Softmax"},
    {OpKind::Embedding, "Embedding"},
    {OpKind::Reshape, "Reshape"},
    {OpKind::Transpose, "Transpose"},
    {OpKind::Flatten, "Flatten"},
    {OpKind::ExpandDims, "ExpandDims"},
    {OpKind::Concat, "Concat"},
    {OpKind::Split, "Split"},
    {OpKind::InsertTensor, "InsertTensor"},
    {OpKind::Sqrt, "Sqrt"},
    {OpKind::Divide, "Divide"},
    {OpKind::Multiply, "Multiply"},
    {OpKind::Negative, "Negative"},
    {OpKind::BatchNorm, "BatchNorm"},
}};

int fused_rank(OpKind k) {
  if (k == OpKind::BiasAdd) return 1;
  if (k == OpKind::ReLU) return 2;
  return 0;
}

}  // namespace

const std::array<OpKind, kNumLabels>& label_registry() {
  static const std::array<OpKind, kNumLabels> registry = [] {
    std::array<OpKind, kNumLabels> r{};
    for (std::size_t i = 0; i < kNumLabels; ++i) r[i] = kKinds[i].kind;
    return r;
  }();
  return registry;
}

std::optional<std::size_t> label_index(OpKind kind) {
  const auto& reg = label_registry();
  auto it = std::find(reg.begin(), reg.end(), kind);
  if (it == reg.end()) return std::nullopt;
  return static_cast<std::size_t>(it - reg.begin());
}

std::string_view kind_name(OpKind kind) {
  for (const auto& e : kKinds)
    if (e.kind == kind) return e.name;
  return "?";
}

std::optional<OpKind> parse_kind(std::string_view name) {
  for (const auto& e : kKinds)
    if (e.name == name) return e.kind;
  return std::nullopt;
}

bool is_layout_utility(OpKind kind) {
  switch (kind) {
    case OpKind::Reshape:
    case OpKind::Transpose:
    case OpKind::Flatten:
    case OpKind::ExpandDims:
    case OpKind::InsertTensor:
      return true;
    default:
      return false;
  }
}

bool is_elementwise(OpKind kind) {
  switch (kind) {
    case OpKind::Add:
    case OpKind::ReLU:
    case OpKind::Sqrt:
    case OpKind::Divide:
    case OpKind::Multiply:
    case OpKind::Negative:
      return true;
    default:
      return false;
  }
}

std::vector<OpKind> fused_order(std::vector<OpKind> kinds) {
  std::stable_sort(kinds.begin(), kinds.end(), [](OpKind a, OpKind b) {
    int ra = fused_rank(a), rb = fused_rank(b);
    if (ra != rb) return ra < rb;
    return static_cast<int>(a) < static_cast<int>(b);
  });
  kinds.erase(std::unique(kinds.begin(), kinds.end()), kinds.end());
  return kinds;
}

}  // namespace nnd
