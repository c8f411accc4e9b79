// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Computation graph recovery from callsite pointer arguments.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "nndecomp/bundle.hpp"
#include "nndecomp/classifier.hpp"
#include "nndecomp/signatures.hpp"

namespace nnd {

struct GraphNode {
  std::uint64_t call_index = 0;
  FuncId func_id = 0;
  OperatorLabelVec labels;
  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  std::uint64_t producer = 0;
  std::uint64_t consumer = 0;
  std::uint64_t via_address = 0;
  bool operator==(const GraphEdge&) const = default;
  auto operator<=>(const GraphEdge&) const = default;
};

struct CompGraph {
  std::vector<GraphNode> nodes;  // call order
  std::vector<GraphEdge> edges;  // sorted by (producer, consumer, address)

  const GraphNode* node(std::uint64_t call_index) const;
  std::vector<GraphEdge> inputs_of(std::uint64_t call_index) const;
  std::vector<GraphEdge> outputs_of(std::uint64_t call_index) const;
  /// Call indices in a topological order; throws CycleDetected.
  std::vector<std::uint64_t> topological_order() const;
  bool operator==(const CompGraph&) const = default;
};

using FunctionLabels = std::map<FuncId, OperatorLabelVec>;

/// Links each input-role pointer of a labeled call to the latest earlier
/// labeled call that has it as an output-role pointer. Calls to utility
/// functions (no labels) are dropped.
CompGraph recover_topology(const TraceBundle& bundle, const FunctionLabels& labels, const SignatureConfig& signatures,
                           Style style);

/// Signature of one callsite under the given labels.
const Signature& callsite_signature(const CallsiteRecord& call, const OperatorLabelVec& labels,
                                   const SignatureConfig& signatures, Style style);

void write_graph(const CompGraph& graph, const std::filesystem::path& file);
CompGraph read_graph(const std::filesystem::path& file);

void write_labels(const FunctionLabels& labels, const std::filesystem::path& file);
FunctionLabels read_labels(const std::filesystem::path& file);

}  // namespace nnd
