// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/bundle.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include "nndecomp/error.hpp"

namespace nnd {

const char* style_name(Style s) {
  switch (s) {
    case Style::TvmO0: return "tvm-o0";
    case Style::TvmO3: return "tvm-o3";
    case Style::Glow: return "glow";
  }
  return "?";
}

Style parse_style(const std::string& text) {
  if (text == "tvm-o0") return Style::TvmO0;
  if (text == "tvm-o3") return Style::TvmO3;
  if (text == "glow") return Style::Glow;
  fail(ErrorCode::InvalidArgument, "unknown style '" + text + "'");
}

Operand Operand::r(std::string name) {
  Operand o;
  o.kind = Kind::Register;
  o.reg = std::move(name);
  return o;
}

Operand Operand::i(std::int64_t value) {
  Operand o;
  o.kind = Kind::Immediate;
  o.imm = value;
  return o;
}

Operand Operand::m(std::uint64_t address, std::uint32_t width, std::string base, std::int64_t disp, std::string index,
                   std::uint32_t scale) {
  Operand o;
  o.kind = Kind::Memory;
  o.address = address;
  o.width = width;
  o.base = std::move(base);
  o.disp = disp;
  o.index = std::move(index);
  o.scale = scale;
  return o;
}

const SnapshotRegion* MemorySnapshot::region_at(std::uint64_t address) const {
  auto it = std::upper_bound(regions.begin(), regions.end(), address,
                             [](std::uint64_t a, const SnapshotRegion& r) { return a < r.base; });
  if (it == regions.begin()) return nullptr;
  --it;
  return address < it->end() ? &*it : nullptr;
}

bool MemorySnapshot::contains(std::uint64_t address, std::uint64_t size) const {
  const auto* r = region_at(address);
  return r && address + size <= r->end();
}

std::span<const std::uint8_t> MemorySnapshot::view(std::uint64_t address, std::uint64_t size) const {
  const auto* r = region_at(address);
  if (!r || address + size > r->end())
    fail(ErrorCode::RegionOutOfSnapshot, "[" + hex(address) + ", +" + std::to_string(size) + ") not in snapshot");
  return std::span<const std::uint8_t>(r->bytes).subspan(address - r->base, size);
}

std::vector<float> MemorySnapshot::read_f32(std::uint64_t address, std::uint64_t count) const {
  auto bytes = view(address, count * 4);
  std::vector<float> out(count);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

void MemorySnapshot::add(std::uint64_t base, std::vector<std::uint8_t> bytes) {
  SnapshotRegion r{base, std::move(bytes)};
  auto it = std::lower_bound(regions.begin(), regions.end(), base,
                             [](const SnapshotRegion& x, std::uint64_t b) { return x.base < b; });
  regions.insert(it, std::move(r));
}

void MemorySnapshot::add_f32(std::uint64_t base, std::span<const float> values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  std::memcpy(bytes.data(), values.data(), bytes.size());
  add(base, std::move(bytes));
}

void MemAccessLog::normalize() {
  for (auto* v : {&reads, &writes}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
}

std::vector<AccessRun> to_runs(std::span<const MemRef> refs) {
  std::vector<AccessRun> runs;
  for (const auto& r : refs) {
    if (!runs.empty() && runs.back().width == r.width && runs.back().end() == r.address) {
      ++runs.back().count;
    } else {
      runs.push_back({r.address, r.width, 1});
    }
  }
  return runs;
}

std::vector<MemRef> from_runs(std::span<const AccessRun> runs) {
  std::vector<MemRef> out;
  for (const auto& run : runs)
    for (std::uint64_t k = 0; k < run.count; ++k) out.push_back({run.base + k * run.width, run.width});
  return out;
}

std::vector<ByteRange> byte_ranges(std::span<const MemRef> refs) {
  std::vector<MemRef> sorted(refs.begin(), refs.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<ByteRange> out;
  for (const auto& r : sorted) {
    if (!out.empty() && r.address <= out.back().end) {
      out.back().end = std::max(out.back().end, r.address + r.width);
    } else {
      out.push_back({r.address, r.address + r.width});
    }
  }
  return out;
}

const AssemblyFunction* TraceBundle::function(FuncId id) const {
  for (const auto& f : functions)
    if (f.id == id) return &f;
  return nullptr;
}

namespace {

bool valid_width(std::uint32_t w) { return w == 4 || w == 8 || w == 16 || w == 32; }

// lea and hinted nops carry an address without touching memory.
bool accesses_memory(const std::string& opcode) { return opcode != "lea" && opcode != "nop"; }

void check_trace(FuncId id, const std::vector<TraceEntry>& trace) {
  const std::string where = "trace of function " + std::to_string(id);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& e = trace[i];
    if (i > 0 && e.seq_no <= trace[i - 1].seq_no)
      fail(ErrorCode::SchemaViolation, where + ": seq_no not increasing at entry " + std::to_string(i));
    if (e.opcode.empty()) fail(ErrorCode::SchemaViolation, where + ": empty opcode at entry " + std::to_string(i));
    for (const auto* v : {&e.reads, &e.writes})
      for (const auto& r : *v)
        if (!valid_width(r.width))
          fail(ErrorCode::SchemaViolation, where + ": access width " + std::to_string(r.width) + " at seq " +
                                               std::to_string(e.seq_no));
    if (!accesses_memory(e.opcode)) continue;
    for (const auto& op : e.operands) {
      if (op.kind != Operand::Kind::Memory) continue;
      auto hit = [&](const std::vector<MemRef>& v) {
        return std::any_of(v.begin(), v.end(), [&](const MemRef& r) { return r.address == op.address; });
      };
      if (!hit(e.reads) && !hit(e.writes))
        fail(ErrorCode::SchemaViolation,
             where + ": memory operand " + hex(op.address) + " not in reads/writes at seq " + std::to_string(e.seq_no));
    }
  }
}

}  // namespace

void validate(const TraceBundle& b) {
  std::set<FuncId> ids;
  for (const auto& f : b.functions) {
    if (!ids.insert(f.id).second) fail(ErrorCode::SchemaViolation, "duplicate func_id " + std::to_string(f.id));
    if (f.opcodes.empty()) fail(ErrorCode::SchemaViolation, "function " + std::to_string(f.id) + " has no opcodes");
  }
  auto known = [&](FuncId id, const char* what) {
    if (!ids.count(id)) fail(ErrorCode::DanglingFuncId, std::string(what) + " references unknown func_id " + std::to_string(id));
  };
  for (const auto& [id, trace] : b.traces) {
    known(id, "trace");
    check_trace(id, trace);
  }
  for (std::size_t i = 0; i < b.callsites.size(); ++i) {
    const auto& c = b.callsites[i];
    known(c.func_id, "callsite");
    if (c.args.empty()) fail(ErrorCode::SchemaViolation, "callsite " + std::to_string(c.call_index) + " has no args");
    if (i > 0 && c.call_index <= b.callsites[i - 1].call_index)
      fail(ErrorCode::SchemaViolation, "callsite call_index not increasing at " + std::to_string(c.call_index));
  }
  for (const auto& [id, log] : b.access_logs) {
    known(id, "access log");
    if (log.func_id != id) fail(ErrorCode::SchemaViolation, "access log key/func_id mismatch for " + std::to_string(id));
    for (const auto* v : {&log.reads, &log.writes}) {
      for (const auto& r : *v)
        if (!valid_width(r.width)) fail(ErrorCode::SchemaViolation, "access log width " + std::to_string(r.width));
      if (std::adjacent_find(v->begin(), v->end(), std::greater_equal<MemRef>()) != v->end())
        fail(ErrorCode::SchemaViolation, "access log of function " + std::to_string(id) + " not sorted/unique");
    }
  }
  const auto& regs = b.snapshot.regions;
  for (std::size_t i = 1; i < regs.size(); ++i) {
    if (regs[i].base < regs[i - 1].base)
      fail(ErrorCode::SchemaViolation, "snapshot regions not sorted at " + hex(regs[i].base));
    if (regs[i].base < regs[i - 1].end())
      fail(ErrorCode::SchemaViolation, "snapshot regions overlap at " + hex(regs[i].base));
  }
}

}  // namespace nnd
