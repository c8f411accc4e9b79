// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nndecomp/bundle.hpp"
#include "nndecomp/semantics.hpp"
#include "nndecomp/signatures.hpp"
#include "nndecomp/symexpr.hpp"

namespace nnd {

/// Symbolic register file and memory. Vector lanes start at +0.0; memory
/// never written during the trace reads as a MemCell leaf.
class SymMachine {
 public:
  explicit SymMachine(const CallTargets* calls = nullptr);

  void step(const TraceEntry& entry);
  SymExpr lane(int vec_index, int lane) const { return vec_[vec_index][lane]; }
  SymExpr mem(std::uint64_t address) const;
  bool written(std::uint64_t address) const { return mem_.count(address) != 0; }

 private:
  SymExpr read(const Loc& loc) const;

  const CallTargets* calls_;
  std::array<std::array<SymExpr, 8>, kNumVec> vec_;
  std::unordered_map<std::uint64_t, SymExpr> mem_;
};

/// Expressions of the given 4-byte cells after running `trace`.
std::vector<SymExpr> sym_execute(std::span<const TraceEntry> trace, std::span<const MemRef> sinks,
                                 const CallTargets* calls = nullptr);
SymExpr sym_execute(std::span<const TraceEntry> trace, MemRef sink, const CallTargets* calls = nullptr);

struct MemRegion {
  std::uint64_t base = 0;
  std::uint64_t size = 0;

  std::uint64_t end() const { return base + size; }
  bool contains(std::uint64_t a) const { return a >= base && a < end(); }
  bool operator==(const MemRegion&) const = default;
};

/// Per-argument regions of one call, indexed like the signature.
struct ScopedRegions {
  std::vector<MemRegion> by_arg;  // size 0 for offset/dims arguments
  std::vector<std::string> warnings;

  /// Region of the first argument carrying `role`; MissingRole if absent.
  const MemRegion& region(const Signature& sig, Role role) const;
};

/// Gap between tensors beyond which two access clusters are unrelated.
inline constexpr std::uint64_t kClusterGap = 4096;
/// Largest gap inside one tensor that is not reported as fragmentation.
inline constexpr std::uint64_t kVectorBytes = 32;

ScopedRegions scope_regions(const MemAccessLog& access, const CallsiteRecord& call, const Signature& sig);

struct RoleTaggedConstraint {
  SymExpr expr;
  std::vector<std::uint64_t> input_cells;  // first-use order
  std::vector<int> input_args;             // argument index of each input cell
  std::vector<std::uint64_t> weight_cells;
  std::vector<std::uint64_t> bias_cells;
  MemRef output_cell;
};

/// Assigns every MemCell to the argument region containing it; throws
/// UnresolvedCell for cells outside all regions.
RoleTaggedConstraint tag_roles(const SymExpr& expr, MemRef output_cell, const Signature& sig,
                               const ScopedRegions& regions);

}  // namespace nnd
