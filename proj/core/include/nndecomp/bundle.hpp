// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// In-memory trace bundle: the static listing, per-function traces, callsite
// pointers, full access logs and the pre-inference memory snapshot.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nnd {

using FuncId = std::uint32_t;

enum class Style { TvmO0, TvmO3, Glow };

inline constexpr std::size_t kNumStyles = 3;

const char* style_name(Style s);  // "tvm-o0" | "tvm-o3" | "glow"
Style parse_style(const std::string& text);

struct MemRef {
  std::uint64_t address = 0;
  std::uint32_t width = 0;

  auto operator<=>(const MemRef&) const = default;
};

struct Operand {
  enum class Kind { Register, Immediate, Memory };
  Kind kind = Kind::Register;
  std::string reg;  // Register
  std::int64_t imm = 0;  // Immediate
  // Memory
  std::string base;
  std::string index;
  std::uint32_t scale = 1;
  std::int64_t disp = 0;
  std::uint64_t address = 0;
  std::uint32_t width = 0;

  static Operand r(std::string name);
  static Operand i(std::int64_t value);
  static Operand m(std::uint64_t address, std::uint32_t width, std::string base = {}, std::int64_t disp = 0,
                   std::string index = {}, std::uint32_t scale = 1);

  bool operator==(const Operand&) const = default;
};

struct TraceEntry {
  std::uint64_t seq_no = 0;
  std::string opcode;
  std::vector<Operand> operands;
  std::vector<MemRef> reads;
  std::vector<MemRef> writes;
  std::map<std::string, std::uint64_t> reg_values;  // before execution

  bool operator==(const TraceEntry&) const = default;
};

struct AssemblyFunction {
  FuncId id = 0;
  std::string name;
  std::vector<std::string> opcodes;
  std::uint64_t entry = 0;

  bool operator==(const AssemblyFunction&) const = default;
};

struct CallsiteRecord {
  std::uint64_t call_index = 0;
  FuncId func_id = 0;
  std::vector<std::uint64_t> args;

  bool operator==(const CallsiteRecord&) const = default;
};

struct SnapshotRegion {
  std::uint64_t base = 0;
  std::vector<std::uint8_t> bytes;

  std::uint64_t end() const { return base + bytes.size(); }
  bool operator==(const SnapshotRegion&) const = default;
};

struct MemorySnapshot {
  std::vector<SnapshotRegion> regions;  // sorted by base

  const SnapshotRegion* region_at(std::uint64_t address) const;
  bool contains(std::uint64_t address, std::uint64_t size) const;
  /// Bytes [address, address+size); throws RegionOutOfSnapshot.
  std::span<const std::uint8_t> view(std::uint64_t address, std::uint64_t size) const;
  std::vector<float> read_f32(std::uint64_t address, std::uint64_t count) const;
  void add(std::uint64_t base, std::vector<std::uint8_t> bytes);
  void add_f32(std::uint64_t base, std::span<const float> values);

  bool operator==(const MemorySnapshot&) const = default;
};

struct MemAccessLog {
  FuncId func_id = 0;
  std::vector<MemRef> reads;  // sorted, unique
  std::vector<MemRef> writes;

  void normalize();
  bool operator==(const MemAccessLog&) const = default;
};

/// Maximal runs of back-to-back accesses of equal width.
struct AccessRun {
  std::uint64_t base = 0;
  std::uint32_t width = 0;
  std::uint64_t count = 0;

  std::uint64_t end() const { return base + width * count; }
  std::uint64_t bytes() const { return width * count; }
  bool operator==(const AccessRun&) const = default;
};

std::vector<AccessRun> to_runs(std::span<const MemRef> sorted_refs);
std::vector<MemRef> from_runs(std::span<const AccessRun> runs);

/// Coalesces byte-contiguous accesses regardless of width.
struct ByteRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;
  std::uint64_t size() const { return end - begin; }
  bool operator==(const ByteRange&) const = default;
};
std::vector<ByteRange> byte_ranges(std::span<const MemRef> refs);

struct TraceBundle {
  std::vector<AssemblyFunction> functions;
  std::map<FuncId, std::vector<TraceEntry>> traces;
  std::vector<CallsiteRecord> callsites;
  std::map<FuncId, MemAccessLog> access_logs;
  MemorySnapshot snapshot;
  std::optional<Style> provenance_truth;

  const AssemblyFunction* function(FuncId id) const;
  bool operator==(const TraceBundle&) const = default;
};

/// Checks every structural invariant; throws SchemaViolation or DanglingFuncId.
void validate(const TraceBundle& bundle);

TraceBundle read_bundle(const std::filesystem::path& dir);
void write_bundle(const TraceBundle& bundle, const std::filesystem::path& dir);

/// Streams one trace file entry by entry.
void stream_trace(const std::filesystem::path& file, const std::function<void(TraceEntry&&)>& sink);

}  // namespace nnd
