// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/taint.hpp"

#include "nndecomp/error.hpp"

namespace nnd {

namespace {

std::uint32_t lane_mask(const Loc& loc) {
  std::uint64_t m = ((1ull << loc.size) - 1) << loc.offset;
  return static_cast<std::uint32_t>(m);
}

}  // namespace

void TaintState::taint(const Loc& loc) {
  if (loc.mem) {
    for (std::uint32_t i = 0; i < loc.size; ++i) mem_.insert(loc.address + i);
  } else {
    regs_[loc.family] |= lane_mask(loc);
  }
}

void TaintState::untaint(const Loc& loc) {
  if (loc.mem) {
    for (std::uint32_t i = 0; i < loc.size; ++i) mem_.erase(loc.address + i);
  } else {
    regs_[loc.family] &= ~lane_mask(loc);
  }
}

bool TaintState::any(const Loc& loc) const {
  if (loc.mem) {
    if (mem_.empty()) return false;
    for (std::uint32_t i = 0; i < loc.size; ++i)
      if (mem_.count(loc.address + i)) return true;
    return false;
  }
  return (regs_[loc.family] & lane_mask(loc)) != 0;
}

bool TaintState::empty() const {
  if (!mem_.empty()) return false;
  for (auto m : regs_)
    if (m) return false;
  return true;
}

TaintedSubtrace taint_backward(std::span<const TraceEntry> trace, std::span<const MemRef> sinks, const CallTargets* calls) {
  if (trace.empty()) fail(ErrorCode::EmptyTrace, "trace has no entries");
  TaintState state;
  for (const auto& s : sinks) state.taint(Loc::memory(s.address, s.width));
  TaintState sink_bytes = state;

  std::vector<std::size_t> kept;
  TaintedSubtrace out;
  std::vector<const LaneDef*> live;
  for (std::size_t i = trace.size(); i-- > 0;) {
    const auto defs = describe(trace[i], calls);
    live.clear();
    for (const auto& d : defs)
      if (state.any(d.dst)) live.push_back(&d);
    if (live.empty()) continue;
    kept.push_back(i);
    for (const auto& d : defs) {
      if (d.dst.mem && sink_bytes.any(d.dst)) out.sink_written = true;
      state.untaint(d.dst);
    }
    for (const auto* d : live)
      for (const auto& s : d->sources()) state.taint(s);
  }
  out.entries.reserve(kept.size());
  for (auto it = kept.rbegin(); it != kept.rend(); ++it) out.entries.push_back(trace[*it]);
  return out;
}

TaintPolicy parse_taint_policy(const std::string& text) {
  if (text == "auto") return TaintPolicy::Auto;
  if (text == "always") return TaintPolicy::Always;
  if (text == "never") return TaintPolicy::Never;
  fail(ErrorCode::InvalidArgument, "taint policy must be auto|always|never, got '" + text + "'");
}

const char* taint_policy_name(TaintPolicy p) {
  switch (p) {
    case TaintPolicy::Auto: return "auto";
    case TaintPolicy::Always: return "always";
    case TaintPolicy::Never: return "never";
  }
  return "?";
}

bool taint_applies(TaintPolicy policy, OpKind anchor) {
  switch (policy) {
    case TaintPolicy::Always: return true;
    case TaintPolicy::Never: return false;
    case TaintPolicy::Auto: return anchor == OpKind::Conv || anchor == OpKind::Dense;
  }
  return false;
}

}  // namespace nnd
