// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/symexec.hpp"

#include <algorithm>
#include <bit>

#include "nndecomp/error.hpp"

namespace nnd {

SymMachine::SymMachine(const CallTargets* calls) : calls_(calls) {
  auto zero = sym::constant(0.0);
  for (auto& v : vec_) v.fill(zero);
}

SymExpr SymMachine::mem(std::uint64_t address) const {
  auto it = mem_.find(address);
  return it != mem_.end() ? it->second : sym::cell(address, 4);
}

SymExpr SymMachine::read(const Loc& loc) const {
  if (loc.mem) return mem(loc.address);
  if (loc.family < kNumGpr) fail(ErrorCode::UnmodeledOpcode, "floating-point read from a general register");
  return vec_[loc.family - kNumGpr][loc.offset / 4];
}

void SymMachine::step(const TraceEntry& entry) {
  const auto defs = describe(entry, calls_);
  std::vector<std::pair<const LaneDef*, SymExpr>> pending;
  pending.reserve(defs.size());
  for (const auto& d : defs) {
    SymExpr v;
    switch (d.op) {
      case LaneOp::Copy: v = read(d.src[0]); break;
      case LaneOp::Zero: v = sym::constant(0.0); break;
      case LaneOp::Const: v = sym::constant(static_cast<double>(std::bit_cast<float>(d.bits))); break;
      case LaneOp::Add: v = sym::add(read(d.src[0]), read(d.src[1])); break;
      case LaneOp::Sub: v = sym::sub(read(d.src[0]), read(d.src[1])); break;
      case LaneOp::Mul: v = sym::mul(read(d.src[0]), read(d.src[1])); break;
      case LaneOp::Div: v = sym::div(read(d.src[0]), read(d.src[1])); break;
      case LaneOp::Max: v = sym::max(read(d.src[0]), read(d.src[1])); break;
      case LaneOp::Min: v = sym::min(read(d.src[0]), read(d.src[1])); break;
      case LaneOp::Sqrt: v = sym::sqrt(read(d.src[0])); break;
      case LaneOp::Exp: v = sym::exp(read(d.src[0])); break;
      case LaneOp::Fma: v = sym::add(read(d.src[0]), sym::mul(read(d.src[1]), read(d.src[2]))); break;
      case LaneOp::Int: break;
    }
    pending.emplace_back(&d, std::move(v));
  }
  for (auto& [d, v] : pending) {
    const Loc& dst = d->dst;
    if (d->op == LaneOp::Int) {
      if (dst.mem)
        for (std::uint64_t a = dst.address & ~3ull; a < dst.address + dst.size; a += 4) mem_.erase(a);
      continue;
    }
    if (dst.mem)
      mem_[dst.address] = std::move(v);
    else
      vec_[dst.family - kNumGpr][dst.offset / 4] = std::move(v);
  }
}

std::vector<SymExpr> sym_execute(std::span<const TraceEntry> trace, std::span<const MemRef> sinks, const CallTargets* calls) {
  SymMachine m(calls);
  for (const auto& e : trace) m.step(e);
  std::vector<SymExpr> out;
  out.reserve(sinks.size());
  for (const auto& s : sinks) out.push_back(m.mem(s.address));
  return out;
}

SymExpr sym_execute(std::span<const TraceEntry> trace, MemRef sink, const CallTargets* calls) {
  return sym_execute(trace, std::span<const MemRef>(&sink, 1), calls).front();
}

const MemRegion& ScopedRegions::region(const Signature& sig, Role role) const {
  int i = find_role(sig, role);
  if (i < 0 || by_arg[static_cast<std::size_t>(i)].size == 0)
    fail(ErrorCode::MissingRole, std::string("no region for role ") + role_name(role));
  return by_arg[static_cast<std::size_t>(i)];
}

namespace {

/// Chain of byte ranges starting at or after `ptr`, merged across gaps
/// smaller than kClusterGap.
MemRegion cluster_at(const std::vector<ByteRange>& ranges, std::uint64_t ptr, std::vector<std::string>& warnings) {
  auto it = std::find_if(ranges.begin(), ranges.end(), [&](const ByteRange& r) { return r.end > ptr; });
  if (it == ranges.end() || it->begin >= ptr + kClusterGap) return {ptr, 0};
  std::uint64_t begin = std::max(it->begin, ptr), end = it->end;
  bool fragmented = false;
  for (++it; it != ranges.end() && it->begin - end < kClusterGap; ++it) {
    fragmented = fragmented || it->begin - end > kVectorBytes;
    end = it->end;
  }
  if (fragmented)
    warnings.push_back("FragmentedRegion: cluster at " + hex(ptr) + " has gaps wider than " +
                       std::to_string(kVectorBytes) + " bytes; using its full extent");
  return {begin, end - begin};
}

}  // namespace

ScopedRegions scope_regions(const MemAccessLog& access, const CallsiteRecord& call, const Signature& sig) {
  if (call.args.size() != sig.size())
    fail(ErrorCode::MissingSignature, "call " + std::to_string(call.call_index) + " has " + std::to_string(call.args.size()) +
                                          " args, signature has " + std::to_string(sig.size()));
  const auto reads = byte_ranges(access.reads);
  const auto writes = byte_ranges(access.writes);
  std::vector<MemRef> both(access.reads);
  both.insert(both.end(), access.writes.begin(), access.writes.end());
  const auto all = byte_ranges(both);

  // Slicing kernels access one tensor from base + offset elements.
  std::uint64_t lead = 0;
  for (std::size_t i = 0; i < sig.size(); ++i)
    if (sig[i].has(Role::Offset)) lead = call.args[i] * sizeof(float);

  ScopedRegions out;
  out.by_arg.resize(sig.size());
  for (std::size_t i = 0; i < sig.size(); ++i) {
    const RoleSet& r = sig[i];
    const std::uint64_t ptr = call.args[i];
    if (r.has(Role::Offset) || r.has(Role::Dims)) {
      out.by_arg[i] = {ptr, 0};
      continue;
    }
    const bool in = r.is_input() || r.has(Role::Weights) || r.has(Role::Biases);
    const auto& ranges = in && r.is_output() ? all : (r.is_output() ? writes : reads);
    out.by_arg[i] = cluster_at(ranges, ptr, out.warnings);
    if (out.by_arg[i].size == 0 && lead != 0) out.by_arg[i] = cluster_at(ranges, ptr + lead, out.warnings);
  }
  return out;
}

RoleTaggedConstraint tag_roles(const SymExpr& expr, MemRef output_cell, const Signature& sig, const ScopedRegions& regions) {
  RoleTaggedConstraint c;
  c.expr = expr;
  c.output_cell = output_cell;
  for (const auto& cell : cells(expr)) {
    int arg = -1;
    for (std::size_t i = 0; i < sig.size(); ++i) {
      if (regions.by_arg[i].contains(cell.address)) {
        arg = static_cast<int>(i);
        break;
      }
    }
    if (arg < 0) fail(ErrorCode::UnresolvedCell, "cell " + hex(cell.address) + " lies in no argument region");
    const RoleSet& r = sig[static_cast<std::size_t>(arg)];
    if (r.has(Role::Weights)) {
      c.weight_cells.push_back(cell.address);
    } else if (r.has(Role::Biases)) {
      c.bias_cells.push_back(cell.address);
    } else {
      c.input_cells.push_back(cell.address);
      c.input_args.push_back(arg);
    }
  }
  return c;
}

}  // namespace nnd
