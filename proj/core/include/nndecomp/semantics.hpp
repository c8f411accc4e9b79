// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Data-flow semantics of the modeled x86 subset. Each instruction is
// described as a list of lane definitions `dst <- op(srcs)`, the common
// ground for taint propagation and symbolic execution.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nndecomp/bundle.hpp"

namespace nnd {

inline constexpr int kNumGpr = 16;
inline constexpr int kNumVec = 16;
inline constexpr int kNumFamilies = kNumGpr + kNumVec;

struct RegInfo {
  std::uint8_t family = 0;  // 0..15 general purpose, 16..31 xmm/ymm
  std::uint8_t size = 0;    // bytes
  std::uint8_t offset = 0;  // byte offset inside the family (ah = 1)
  bool is_vector() const { return family >= kNumGpr; }
};

std::optional<RegInfo> parse_reg(std::string_view name);
/// Canonical name of a register of the given family and width.
std::string reg_name(int family, int size);

/// A byte range in a register family or in memory.
struct Loc {
  bool mem = false;
  std::uint8_t family = 0;
  std::uint32_t offset = 0;  // within the register family
  std::uint64_t address = 0;
  std::uint32_t size = 0;

  static Loc reg(int family, std::uint32_t offset, std::uint32_t size) {
    return {false, static_cast<std::uint8_t>(family), offset, 0, size};
  }
  static Loc memory(std::uint64_t address, std::uint32_t size) { return {true, 0, 0, address, size}; }
  bool operator==(const Loc&) const = default;
};

enum class LaneOp : std::uint8_t {
  Copy,   // dst = src0
  Zero,   // dst = +0.0
  Const,  // dst = bitcast(bits); src0 names the general register it came from
  Add,
  Sub,
  Mul,
  Div,
  Max,
  Min,
  Sqrt,
  Exp,
  Fma,  // dst = src0 + src1 * src2
  Int,  // integer or opaque data movement; no floating-point meaning
};

struct LaneDef {
  Loc dst;
  LaneOp op = LaneOp::Copy;
  std::uint8_t nsrc = 0;
  std::array<Loc, 3> src{};
  std::uint32_t bits = 0;

  std::span<const Loc> sources() const { return {src.data(), nsrc}; }
};

/// Entry addresses of known external routines (e.g. "expf").
using CallTargets = std::map<std::uint64_t, std::string>;

CallTargets call_targets(const TraceBundle& bundle);

/// Lane definitions of one executed instruction. Flags are not modeled.
/// Throws UnmodeledOpcode for anything outside the modeled subset.
std::vector<LaneDef> describe(const TraceEntry& entry, const CallTargets* calls = nullptr);

bool is_modeled(std::string_view opcode);

}  // namespace nnd
