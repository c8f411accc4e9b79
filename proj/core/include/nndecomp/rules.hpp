// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Consistency rules over a draft model: automatic repairs for dimension,
// operator-kind and activation errors; review findings for the rest.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nndecomp/classifier.hpp"
#include "nndecomp/error.hpp"
#include "nndecomp/model.hpp"
#include "nndecomp/recover.hpp"
#include "nndecomp/topology.hpp"

namespace nnd {

/// What recovery observed for the call that produced a draft op.
struct OpEvidence {
  std::uint64_t call_index = 0;
  FuncId func_id = 0;
  OpKind anchor = OpKind::ReLU;
  OperatorLabelVec labels;
  std::size_t mul_count = 0;
  bool has_max = false;
  std::uint64_t M_i = 0, M_w = 0, M_o = 0, written_bytes = 0;
  std::optional<ErrorCode> error;
  std::string error_message;
  bool degenerate = false;     // stride guessed
  bool is_activation = false;  // the ReLU split off a fused call
};

struct Finding {
  int rule_id = 0;
  FuncId func_id = 0;
  std::uint64_t call_index = 0;
  std::string op_id;
  std::string subtype;  // e.g. "relu-added" for the converse of the activation rule
  std::string description;
  bool fix_applied = false;
  std::string before;
  std::string after;

  bool needs_review() const { return !fix_applied; }
  bool operator==(const Finding&) const = default;
};

/// A model assembled from recovered operators, possibly inconsistent.
struct DraftModel {
  ModelSpec spec;
  std::map<std::string, OpEvidence> evidence;  // keyed by op id; fused activations share their anchor's
  std::vector<Finding> findings;               // repairs applied so far
  /// Function labels the rules corrected; recovery must be rerun with them.
  std::map<FuncId, OperatorLabelVec> relabel;

};

inline constexpr int kMaxRulePasses = 3;

/// Replaces non-integral or inconsistent convolution dimensions using the
/// input and output shapes and the multiplication count of one output.
ConvDims repair_conv_dims(const Shape& in, const Shape& out, std::int64_t mul_count);

/// Rules 1-4 repeated to a fixpoint (at most kMaxRulePasses passes), then
/// review findings for low-confidence labels, recovery failures and shape
/// mismatches. Idempotent.
DraftModel apply_rules(DraftModel draft);

/// Shapes of every op whose inputs are known and consistent.
std::map<std::string, Shape> partial_shapes(const ModelSpec& spec);

std::string describe_op(const ModelSpec& spec, const OpSpec& op);

void write_findings(const std::vector<Finding>& findings, const std::filesystem::path& file);
std::vector<Finding> read_findings(const std::filesystem::path& file);

}  // namespace nnd
