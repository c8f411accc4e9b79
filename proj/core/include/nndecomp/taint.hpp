// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "nndecomp/bundle.hpp"
#include "nndecomp/op_kind.hpp"
#include "nndecomp/semantics.hpp"

namespace nnd {

/// Byte-granular taint over register families and memory.
class TaintState {
 public:
  void taint(const Loc& loc);
  void untaint(const Loc& loc);
  bool any(const Loc& loc) const;
  bool empty() const;

 private:
  std::array<std::uint32_t, kNumFamilies> regs_{};
  std::unordered_set<std::uint64_t> mem_;
};

struct TaintedSubtrace {
  std::vector<TraceEntry> entries;  // original order, seq_no preserved
  bool sink_written = false;        // false: no kept entry wrote a sink byte
};

/// Backward pass from the last entry to the first, keeping exactly the
/// entries that write a currently tainted byte. Throws EmptyTrace.
TaintedSubtrace taint_backward(std::span<const TraceEntry> trace, std::span<const MemRef> sinks,
                               const CallTargets* calls = nullptr);

enum class TaintPolicy { Auto, Always, Never };

TaintPolicy parse_taint_policy(const std::string& text);
const char* taint_policy_name(TaintPolicy p);
/// Auto restricts taint to Conv and Dense kernels.
bool taint_applies(TaintPolicy policy, OpKind anchor);

}  // namespace nnd
