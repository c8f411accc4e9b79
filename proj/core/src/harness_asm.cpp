// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "harness_internal.hpp"
#include "nndecomp/error.hpp"
#include "nndecomp/semantics.hpp"

namespace nnd::harness {

Asm::Asm(std::uint64_t& seq, std::uint64_t stack_top) : seq_(seq) { gpr_[4] = stack_top; }

int Asm::family(const std::string& reg) const {
  auto r = parse_reg(reg);
  if (!r || r->is_vector()) fail(ErrorCode::InvalidArgument, "not a general register: " + reg);
  return r->family;
}

void Asm::set(const std::string& reg, std::uint64_t value) { write_gpr(reg, value); }

std::uint64_t Asm::get(const std::string& reg) const {
  auto r = parse_reg(reg);
  if (!r || r->is_vector()) fail(ErrorCode::InvalidArgument, "not a general register: " + reg);
  std::uint64_t v = gpr_[r->family] >> (8 * r->offset);
  return r->size == 8 ? v : v & ((1ull << (8 * r->size)) - 1);
}

void Asm::write_gpr(const std::string& reg, std::uint64_t value) {
  auto r = parse_reg(reg);
  if (!r || r->is_vector()) fail(ErrorCode::InvalidArgument, "not a general register: " + reg);
  auto& slot = gpr_[r->family];
  switch (r->size) {
    case 8: slot = value; break;
    case 4: slot = value & 0xffffffffull; break;
    default: {
      std::uint64_t mask = ((1ull << (8 * r->size)) - 1) << (8 * r->offset);
      slot = (slot & ~mask) | ((value << (8 * r->offset)) & mask);
    }
  }
}

Operand Asm::at(const std::string& base, std::uint64_t address, std::uint32_t width) const {
  auto disp = static_cast<std::int64_t>(address - get(base));
  return Operand::m(address, width, base, disp);
}

Operand Asm::at(const std::string& base, const std::string& index, std::uint32_t scale, std::uint64_t address,
                std::uint32_t width) const {
  auto disp = static_cast<std::int64_t>(address - get(base) - get(index) * scale);
  return Operand::m(address, width, base, disp, index, scale);
}

void Asm::record(TraceEntry e, SL loc) {
  auto note = [&](const std::string& name) {
    if (name.empty()) return;
    auto r = parse_reg(name);
    if (r && !r->is_vector()) e.reg_values[reg_name(r->family, 8)] = gpr_[r->family];
  };
  for (const auto& op : e.operands) {
    if (op.kind == Operand::Kind::Register) note(op.reg);
    if (op.kind == Operand::Kind::Memory) {
      note(op.base);
      note(op.index);
    }
  }
  const bool implicit = e.opcode == "push" || e.opcode == "pop" || e.opcode == "call";
  if (!implicit) {
    const auto defs = describe(e);
    for (const auto& op : e.operands) {
      if (op.kind != Operand::Kind::Memory) continue;
      const std::uint64_t lo = op.address, hi = op.address + op.width;
      bool rd = false, wr = false;
      for (const auto& d : defs) {
        if (d.dst.mem && d.dst.address < hi && lo < d.dst.address + d.dst.size) wr = true;
        for (const auto& s : d.sources())
          if (s.mem && s.address < hi && lo < s.address + s.size) rd = true;
      }
      if (rd) e.reads.push_back({op.address, op.width});
      if (wr) e.writes.push_back({op.address, op.width});
    }
  }
  e.seq_no = seq_++;
  std::string key = std::string(loc.file_name()) + ":" + std::to_string(loc.line()) + ":" + std::to_string(loc.column()) +
                    ":" + e.opcode;
  if (sites_.insert(key).second) listing_.push_back(e.opcode);
  reads_.insert(reads_.end(), e.reads.begin(), e.reads.end());
  writes_.insert(writes_.end(), e.writes.begin(), e.writes.end());
  trace_.push_back(std::move(e));
}

void Asm::emit(const std::string& mnemonic, std::vector<Operand> ops, SL loc) {
  TraceEntry e;
  e.opcode = mnemonic;
  e.operands = std::move(ops);
  record(std::move(e), loc);
}

namespace {
TraceEntry make(const std::string& m, std::vector<Operand> ops) {
  TraceEntry e;
  e.opcode = m;
  e.operands = std::move(ops);
  return e;
}
}  // namespace

void Asm::mov(const std::string& dst, std::int64_t imm, SL loc) {
  record(make("mov", {Operand::r(dst), Operand::i(imm)}), loc);
  write_gpr(dst, static_cast<std::uint64_t>(imm));
}

void Asm::mov_rr(const std::string& dst, const std::string& src, SL loc) {
  std::uint64_t v = get(src);
  record(make("mov", {Operand::r(dst), Operand::r(src)}), loc);
  write_gpr(dst, v);
}

void Asm::load(const std::string& dst, const Operand& mem, std::uint64_t value, SL loc) {
  record(make("mov", {Operand::r(dst), mem}), loc);
  write_gpr(dst, value);
}

void Asm::store(const Operand& mem, const std::string& src, SL loc) { record(make("mov", {mem, Operand::r(src)}), loc); }

void Asm::add(const std::string& dst, std::int64_t imm, SL loc) {
  std::uint64_t v = get(dst) + static_cast<std::uint64_t>(imm);
  record(make("add", {Operand::r(dst), Operand::i(imm)}), loc);
  write_gpr(dst, v);
}

void Asm::add_rr(const std::string& dst, const std::string& src, SL loc) {
  std::uint64_t v = get(dst) + get(src);
  record(make("add", {Operand::r(dst), Operand::r(src)}), loc);
  write_gpr(dst, v);
}

void Asm::sub(const std::string& dst, std::int64_t imm, SL loc) {
  std::uint64_t v = get(dst) - static_cast<std::uint64_t>(imm);
  record(make("sub", {Operand::r(dst), Operand::i(imm)}), loc);
  write_gpr(dst, v);
}

void Asm::imul(const std::string& dst, const std::string& src, std::int64_t imm, SL loc) {
  std::uint64_t v = get(src) * static_cast<std::uint64_t>(imm);
  record(make("imul", {Operand::r(dst), Operand::r(src), Operand::i(imm)}), loc);
  write_gpr(dst, v);
}

void Asm::shl(const std::string& dst, int n, SL loc) {
  std::uint64_t v = get(dst) << n;
  record(make("shl", {Operand::r(dst), Operand::i(n)}), loc);
  write_gpr(dst, v);
}

void Asm::sar(const std::string& dst, int n, SL loc) {
  auto v = static_cast<std::uint64_t>(static_cast<std::int64_t>(get(dst)) >> n);
  record(make("sar", {Operand::r(dst), Operand::i(n)}), loc);
  write_gpr(dst, v);
}

void Asm::shr(const std::string& dst, int n, SL loc) {
  std::uint64_t v = get(dst) >> n;
  record(make("shr", {Operand::r(dst), Operand::i(n)}), loc);
  write_gpr(dst, v);
}

void Asm::lea(const std::string& dst, const Operand& mem, SL loc) {
  record(make("lea", {Operand::r(dst), mem}), loc);
  write_gpr(dst, mem.address);
}

void Asm::inc(const std::string& dst, SL loc) {
  std::uint64_t v = get(dst) + 1;
  record(make("inc", {Operand::r(dst)}), loc);
  write_gpr(dst, v);
}

void Asm::zero(const std::string& dst, SL loc) {
  record(make("xor", {Operand::r(dst), Operand::r(dst)}), loc);
  write_gpr(dst, 0);
}

void Asm::movsxd(const std::string& dst, const std::string& src, SL loc) {
  auto v = static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(get(src))));
  record(make("movsxd", {Operand::r(dst), Operand::r(src)}), loc);
  write_gpr(dst, v);
}

void Asm::cdqe(SL loc) {
  auto v = static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(get("eax"))));
  record(make("cdqe", {}), loc);
  write_gpr("rax", v);
}

void Asm::cvttss2si(const std::string& dst, const Operand& mem, std::int64_t value, SL loc) {
  record(make("cvttss2si", {Operand::r(dst), mem}), loc);
  write_gpr(dst, static_cast<std::uint64_t>(value));
}

void Asm::cmp(const std::string& reg, std::int64_t imm, SL loc) {
  record(make("cmp", {Operand::r(reg), Operand::i(imm)}), loc);
}

void Asm::cmp_rr(const std::string& a, const std::string& b, SL loc) {
  record(make("cmp", {Operand::r(a), Operand::r(b)}), loc);
}

void Asm::test(const std::string& reg, SL loc) { record(make("test", {Operand::r(reg), Operand::r(reg)}), loc); }

void Asm::jcc(const std::string& cc, std::uint64_t target, SL loc) {
  record(make(cc, {Operand::i(static_cast<std::int64_t>(target))}), loc);
}

void Asm::push(const std::string& reg, SL loc) {
  std::uint64_t sp = gpr_[4] - 8;
  TraceEntry e = make("push", {Operand::r(reg)});
  e.writes.push_back({sp, 8});
  record(std::move(e), loc);
  gpr_[4] = sp;
}

void Asm::pop(const std::string& reg, SL loc) {
  std::uint64_t sp = gpr_[4];
  TraceEntry e = make("pop", {Operand::r(reg)});
  e.reads.push_back({sp, 8});
  record(std::move(e), loc);
  gpr_[4] = sp + 8;
}

void Asm::ret(SL loc) {
  TraceEntry e = make("ret", {});
  record(std::move(e), loc);
}

void Asm::call(std::uint64_t target, SL loc) {
  TraceEntry e = make("call", {Operand::i(static_cast<std::int64_t>(target))});
  e.writes.push_back({gpr_[4] - 8, 8});
  record(std::move(e), loc);
}

void Asm::loop_tail(const std::string& counter, std::int64_t bound, SL loc) {
  inc(counter, loc);
  cmp(counter, bound, loc);
  jcc("jl", 0, loc);
}

}  // namespace nnd::harness
