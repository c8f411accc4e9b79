// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Dimension patterns over role-tagged constraints, weight layout detection
// and parameter extraction.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nndecomp/bundle.hpp"
#include "nndecomp/classifier.hpp"
#include "nndecomp/error.hpp"
#include "nndecomp/symexec.hpp"
#include "nndecomp/taint.hpp"
#include "nndecomp/tensor.hpp"

namespace nnd {

inline constexpr std::uint64_t kElemBytes = 4;

/// Square convolution geometry.
struct ConvDims {
  std::int64_t K = 0, I_C = 0, O_C = 0, S = 1, P = 0, IH = 0, OH = 0;

  /// OH == floor((IH + 2P - K) / S) + 1 with every field positive (P >= 0).
  bool consistent() const;
  Shape weight_shape() const { return {O_C, I_C, K, K}; }
  bool operator==(const ConvDims&) const = default;
};

struct LayoutDesc {
  enum class Kind { Plain, Glow5d, Tvm6d };
  Kind kind = Kind::Plain;
  std::int64_t A = 0, B = 0;

  static LayoutDesc plain() { return {}; }
  static LayoutDesc glow5d(std::int64_t a) { return {Kind::Glow5d, a, 0}; }
  static LayoutDesc tvm6d(std::int64_t a, std::int64_t b) { return {Kind::Tvm6d, a, b}; }

  std::string str() const;  // "plain", "glow5d(A=8)", "tvm6d(A=32,B=32)"
  /// Shape of the stored tensor, e.g. [O_C/B, I_C/A, K, K, A, B].
  Shape stored_shape(std::int64_t O_C, std::int64_t I_C, std::int64_t K) const;
  /// Stored element index of canonical weight (oc, ic, ky, kx).
  std::uint64_t index(std::int64_t oc, std::int64_t ic, std::int64_t ky, std::int64_t kx, std::int64_t I_C,
                      std::int64_t K) const;
  /// Divisibility requirements against the filter.
  bool fits(std::int64_t O_C, std::int64_t I_C) const;
  bool operator==(const LayoutDesc&) const = default;
};

struct KernelAndChannels {
  std::int64_t K = 0, I_C = 0;
  std::int64_t IH = 0;  // 0 when the window spans a single row
};

/// K is the longest run of 4-byte steps in the sorted input offsets,
/// I_C = |cells| / K^2 and IH is the offset of the second window row.
KernelAndChannels conv_kernel_and_ic(const RoleTaggedConstraint& c);
std::int64_t conv_padding(std::int64_t this_IH, std::int64_t prev_OH);
/// Fills O_C, IH, OH and S from region sizes; K, I_C and P must be set.
/// Throws DegenerateOutput when OH is 1.
ConvDims conv_oc_and_stride(ConvDims partial, std::uint64_t M_w, std::uint64_t M_i, std::uint64_t M_o);

struct FcDims {
  std::int64_t M = 0, N = 0;
};
FcDims fc_dims(const RoleTaggedConstraint& c, std::uint64_t M_o);

struct PoolDims {
  std::int64_t K = 0, S = 0;
};
/// Constraints of two horizontally adjacent output elements.
PoolDims pool_dims(const RoleTaggedConstraint& c1, const RoleTaggedConstraint& c2);

std::int64_t lrn_neighbors(const RoleTaggedConstraint& c);

struct EmbeddingDims {
  std::int64_t D = 0, N = 0;
};
EmbeddingDims embedding_dims(const MemAccessLog& access, const MemRegion& table_region);

MemRegion bias_region(const MemAccessLog& access, const CallsiteRecord& call, const Signature& sig);

/// Fits the stored layout of a filter from the first-use order of one output
/// channel's weight offsets (bytes from the weight base). A second list for
/// the next output channel, when given, must agree as well.
LayoutDesc detect_layout(std::span<const std::uint64_t> weight_offsets, const ConvDims& dims,
                         std::span<const std::uint64_t> next_channel_offsets = {});

/// Reads a parameter tensor in canonical order. 4-D shapes are treated as
/// [O_C, I_C, K, K] filters stored in `layout`.
Tensor extract_params(const MemorySnapshot& snapshot, const MemRegion& region, const LayoutDesc& layout,
                      const Shape& canonical);

/// One argument of an analysed call.
struct ArgInfo {
  int index = -1;
  RoleSet roles;
  std::uint64_t address = 0;
  MemRegion region;
  bool in_snapshot = false;  // parameter data embedded in the executable
};

/// Dimensions, layout and parameters of one analysed call.
struct RecoveredOp {
  std::uint64_t call_index = 0;
  FuncId func_id = 0;
  OpKind kind = OpKind::ReLU;  // anchor operator
  OperatorLabelVec labels;
  std::map<std::string, double> dims;
  std::map<std::string, double> attrs;
  LayoutDesc layout;
  std::map<std::string, Tensor> params;  // "weights", "bias"
  bool fused_bias = false;
  bool fused_relu = false;

  std::vector<ArgInfo> inputs;  // activation-like inputs in role order (in/in1, in2)
  ArgInfo output;
  std::vector<RoleTaggedConstraint> constraints;
  std::vector<std::uint64_t> weight_offsets;

  /// Evidence for the checking rules.
  std::size_t mul_count = 0;
  bool has_max = false;
  std::uint64_t M_i = 0, M_w = 0, M_o = 0, written_bytes = 0;
  std::vector<std::string> warnings;
  std::optional<ErrorCode> error;  // recovery stopped short; see error_message
  std::string error_message;
  bool needs_review = false;

  double dim(const std::string& key) const;
  /// Multi-line rendering of the constraints with role-tagged cell names.
  std::string constraint_text() const;
};

struct OperatorContext {
  const TraceBundle* bundle = nullptr;
  const CallsiteRecord* call = nullptr;
  const Signature* signature = nullptr;
  OperatorLabelVec labels;
  TaintPolicy taint = TaintPolicy::Auto;
  const CallTargets* calls = nullptr;
};

/// Runs taint, symbolic execution and the per-family patterns for one call.
/// Pattern failures are recorded in `error` rather than thrown; trace-level
/// failures (unmodeled opcodes, unresolved cells) are thrown.
RecoveredOp recover_operator(const OperatorContext& ctx);

}  // namespace nnd
