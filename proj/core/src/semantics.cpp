// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/semantics.hpp"

#include <functional>
#include <unordered_map>

#include "nndecomp/error.hpp"

namespace nnd {

namespace {

constexpr const char* kGpr64[kNumGpr] = {"rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
                                          "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15"};
constexpr const char* kGpr32[kNumGpr] = {"eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi",
                                          "r8d", "r9d", "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"};
constexpr const char* kGpr16[kNumGpr] = {"ax",  "cx",  "dx",   "bx",   "sp",   "bp",   "si",   "di",
                                          "r8w", "r9w", "r10w", "r11w", "r12w", "r13w", "r14w", "r15w"};
constexpr const char* kGpr8[kNumGpr] = {"al",  "cl",  "dl",   "bl",   "spl",  "bpl",  "sil",  "dil",
                                         "r8b", "r9b", "r10b", "r11b", "r12b", "r13b", "r14b", "r15b"};

const std::unordered_map<std::string, RegInfo>& reg_table() {
  static const auto table = [] {
    std::unordered_map<std::string, RegInfo> t;
    for (int i = 0; i < kNumGpr; ++i) {
      auto f = static_cast<std::uint8_t>(i);
      t[kGpr64[i]] = {f, 8, 0};
      t[kGpr32[i]] = {f, 4, 0};
      t[kGpr16[i]] = {f, 2, 0};
      t[kGpr8[i]] = {f, 1, 0};
    }
    t["ah"] = {0, 1, 1};
    t["ch"] = {1, 1, 1};
    t["dh"] = {2, 1, 1};
    t["bh"] = {3, 1, 1};
    for (int i = 0; i < kNumVec; ++i) {
      auto f = static_cast<std::uint8_t>(kNumGpr + i);
      t["xmm" + std::to_string(i)] = {f, 16, 0};
      t["ymm" + std::to_string(i)] = {f, 32, 0};
    }
    return t;
  }();
  return table;
}

[[noreturn]] void unmodeled(const TraceEntry& e, const std::string& why) {
  fail(ErrorCode::UnmodeledOpcode, "'" + e.opcode + "' at seq " + std::to_string(e.seq_no) + ": " + why);
}

/// Operand view used by the per-opcode rules.
struct Arg {
  const Operand* op = nullptr;
  RegInfo reg{};

  bool is_reg() const { return op->kind == Operand::Kind::Register; }
  bool is_mem() const { return op->kind == Operand::Kind::Memory; }
  bool is_imm() const { return op->kind == Operand::Kind::Immediate; }
  bool is_vec() const { return is_reg() && reg.is_vector(); }
  bool is_gpr() const { return is_reg() && !reg.is_vector(); }
  std::uint32_t width() const { return is_reg() ? reg.size : op->width; }
  std::uint32_t lanes() const { return width() / 4; }

  /// 4-byte float lane `i`.
  Loc lane(std::uint32_t i) const {
    if (is_mem()) return Loc::memory(op->address + 4ull * i, 4);
    return Loc::reg(reg.family, 4 * i, 4);
  }
  /// The whole operand as one location.
  Loc whole() const {
    if (is_mem()) return Loc::memory(op->address, op->width);
    return Loc::reg(reg.family, reg.offset, reg.size);
  }
};

struct Ctx {
  const TraceEntry& e;
  const CallTargets* calls;
  std::vector<Arg> args;
  std::vector<LaneDef> out;

  const Arg& a(std::size_t i) const {
    if (i >= args.size()) unmodeled(e, "expected at least " + std::to_string(i + 1) + " operands");
    return args[i];
  }
  void need(std::size_t n) const {
    if (args.size() != n) unmodeled(e, "expected " + std::to_string(n) + " operands, got " + std::to_string(args.size()));
  }
  void def(Loc dst, LaneOp op, std::initializer_list<Loc> srcs = {}, std::uint32_t bits = 0) {
    LaneDef d;
    d.dst = dst;
    d.op = op;
    d.bits = bits;
    for (const auto& s : srcs) d.src[d.nsrc++] = s;
    out.push_back(d);
  }
  /// Zero lanes [from, 8) of a vector destination (VEX upper clearing).
  void zero_upper(const Arg& dst, std::uint32_t from) {
    for (std::uint32_t i = from; i < 8; ++i) def(Loc::reg(dst.reg.family, 4 * i, 4), LaneOp::Zero);
  }
  void require_vec(const Arg& x) const {
    if (!x.is_vec()) unmodeled(e, "expected a vector register operand");
  }
  /// Value of the general register `name` before execution.
  std::uint64_t gpr_value(const Arg& x) const {
    std::string full = kGpr64[x.reg.family];
    auto it = e.reg_values.find(full);
    if (it == e.reg_values.end()) it = e.reg_values.find(kGpr32[x.reg.family]);
    if (it == e.reg_values.end()) unmodeled(e, "missing reg_values entry for " + full);
    return it->second >> (8 * x.reg.offset);
  }
};

/// Destination of an integer write: 32-bit writes clear the upper half.
Loc int_dst(const Arg& x) {
  if (x.is_gpr() && x.reg.size == 4) return Loc::reg(x.reg.family, 0, 8);
  return x.whole();
}

std::vector<Loc> addr_regs(const Operand& o) {
  std::vector<Loc> regs;
  for (const auto* name : {&o.base, &o.index}) {
    if (name->empty()) continue;
    auto r = parse_reg(*name);
    if (r) regs.push_back(Loc::reg(r->family, r->offset, r->size));
  }
  return regs;
}

LaneOp arith_op(std::string_view m) {
  if (m.starts_with("add")) return LaneOp::Add;
  if (m.starts_with("sub")) return LaneOp::Sub;
  if (m.starts_with("mul")) return LaneOp::Mul;
  if (m.starts_with("div")) return LaneOp::Div;
  if (m.starts_with("max")) return LaneOp::Max;
  if (m.starts_with("min")) return LaneOp::Min;
  return LaneOp::Sqrt;
}

// Legacy SSE scalar: movss, addss, ..., sqrtss.
void sse_scalar(Ctx& c) {
  c.need(2);
  const auto &d = c.a(0), &s = c.a(1);
  const std::string_view m = c.e.opcode;
  if (m == "movss") {
    if (d.is_mem()) {
      c.require_vec(s);
      c.def(d.lane(0), LaneOp::Copy, {s.lane(0)});
    } else {
      c.require_vec(d);
      c.def(d.lane(0), LaneOp::Copy, {s.lane(0)});
      if (s.is_mem())
        for (std::uint32_t i = 1; i < 4; ++i) c.def(d.lane(i), LaneOp::Zero);
    }
    return;
  }
  c.require_vec(d);
  LaneOp op = arith_op(m);
  if (op == LaneOp::Sqrt)
    c.def(d.lane(0), op, {s.lane(0)});
  else
    c.def(d.lane(0), op, {d.lane(0), s.lane(0)});
}

// Legacy SSE packed on xmm: movaps, movups, addps, mulps, maxps, ...
void sse_packed(Ctx& c) {
  c.need(2);
  const auto &d = c.a(0), &s = c.a(1);
  const std::string_view m = c.e.opcode;
  if (m == "movaps" || m == "movups") {
    for (std::uint32_t i = 0; i < 4; ++i) c.def(d.lane(i), LaneOp::Copy, {s.lane(i)});
    return;
  }
  c.require_vec(d);
  if (m == "xorps") {
    if (!(s.is_vec() && s.reg.family == d.reg.family)) unmodeled(c.e, "only the zeroing idiom is modeled");
    for (std::uint32_t i = 0; i < 4; ++i) c.def(d.lane(i), LaneOp::Zero);
    return;
  }
  LaneOp op = arith_op(m);
  for (std::uint32_t i = 0; i < 4; ++i) {
    if (op == LaneOp::Sqrt)
      c.def(d.lane(i), op, {s.lane(i)});
    else
      c.def(d.lane(i), op, {d.lane(i), s.lane(i)});
  }
}

// VEX scalar three-operand forms.
void vex_scalar(Ctx& c) {
  const std::string_view m = c.e.opcode;
  if (m == "vmovss") {
    if (c.args.size() == 2) {
      const auto &d = c.a(0), &s = c.a(1);
      if (d.is_mem()) {
        c.require_vec(s);
        c.def(d.lane(0), LaneOp::Copy, {s.lane(0)});
      } else {
        c.require_vec(d);
        if (!s.is_mem()) unmodeled(c.e, "two-operand vmovss needs a memory source");
        c.def(d.lane(0), LaneOp::Copy, {s.lane(0)});
        c.zero_upper(d, 1);
      }
      return;
    }
    c.need(3);
    const auto &d = c.a(0), &a = c.a(1), &b = c.a(2);
    c.def(d.lane(0), LaneOp::Copy, {b.lane(0)});
    for (std::uint32_t i = 1; i < 4; ++i) c.def(d.lane(i), LaneOp::Copy, {a.lane(i)});
    c.zero_upper(d, 4);
    return;
  }
  c.need(3);
  const auto &d = c.a(0), &a = c.a(1), &b = c.a(2);
  c.require_vec(d);
  if (m == "vfmadd231ss") {
    c.def(d.lane(0), LaneOp::Fma, {d.lane(0), a.lane(0), b.lane(0)});
    c.zero_upper(d, 4);
    return;
  }
  LaneOp op = arith_op(m.substr(1));
  if (op == LaneOp::Sqrt)
    c.def(d.lane(0), op, {b.lane(0)});
  else
    c.def(d.lane(0), op, {a.lane(0), b.lane(0)});
  for (std::uint32_t i = 1; i < 4; ++i) c.def(d.lane(i), LaneOp::Copy, {a.lane(i)});
  c.zero_upper(d, 4);
}

// VEX packed forms on xmm or ymm.
void vex_packed(Ctx& c) {
  const std::string_view m = c.e.opcode;
  const auto& d = c.a(0);
  if (m == "vmovups" || m == "vmovaps") {
    c.need(2);
    const auto& s = c.a(1);
    std::uint32_t n = d.is_mem() ? s.lanes() : d.lanes();
    for (std::uint32_t i = 0; i < n; ++i) c.def(d.lane(i), LaneOp::Copy, {s.lane(i)});
    if (d.is_vec()) c.zero_upper(d, n);
    return;
  }
  c.require_vec(d);
  const std::uint32_t n = d.lanes();
  if (m == "vbroadcastss") {
    c.need(2);
    for (std::uint32_t i = 0; i < n; ++i) c.def(d.lane(i), LaneOp::Copy, {c.a(1).lane(0)});
    c.zero_upper(d, n);
    return;
  }
  if (m == "vsqrtps") {
    c.need(2);
    for (std::uint32_t i = 0; i < n; ++i) c.def(d.lane(i), LaneOp::Sqrt, {c.a(1).lane(i)});
    c.zero_upper(d, n);
    return;
  }
  if (m == "vmovshdup") {
    c.need(2);
    const auto& s = c.a(1);
    for (std::uint32_t i = 0; i < n; ++i) c.def(d.lane(i), LaneOp::Copy, {s.lane(i | 1u)});
    c.zero_upper(d, n);
    return;
  }
  if (m == "vextractf128") {
    c.need(3);
    const auto& s = c.a(1);
    auto hi = static_cast<std::uint32_t>(c.a(2).op->imm & 1) * 4;
    for (std::uint32_t i = 0; i < 4; ++i) c.def(d.lane(i), LaneOp::Copy, {s.lane(hi + i)});
    c.zero_upper(d, 4);
    return;
  }
  c.need(3);
  const auto &a = c.a(1), &b = c.a(2);
  if (m == "vxorps" || m == "vpxor") {
    if (!(a.is_vec() && b.is_vec() && a.reg.family == b.reg.family)) unmodeled(c.e, "only the zeroing idiom is modeled");
    for (std::uint32_t i = 0; i < n; ++i) c.def(d.lane(i), LaneOp::Zero);
    c.zero_upper(d, n);
    return;
  }
  if (m == "vhaddps") {
    if (n != 4) unmodeled(c.e, "only the xmm form is modeled");
    c.def(d.lane(0), LaneOp::Add, {a.lane(0), a.lane(1)});
    c.def(d.lane(1), LaneOp::Add, {a.lane(2), a.lane(3)});
    c.def(d.lane(2), LaneOp::Add, {b.lane(0), b.lane(1)});
    c.def(d.lane(3), LaneOp::Add, {b.lane(2), b.lane(3)});
    c.zero_upper(d, 4);
    return;
  }
  if (m == "vmovhlps") {
    c.def(d.lane(0), LaneOp::Copy, {b.lane(2)});
    c.def(d.lane(1), LaneOp::Copy, {b.lane(3)});
    c.def(d.lane(2), LaneOp::Copy, {a.lane(2)});
    c.def(d.lane(3), LaneOp::Copy, {a.lane(3)});
    c.zero_upper(d, 4);
    return;
  }
  if (m == "vfmadd231ps") {
    for (std::uint32_t i = 0; i < n; ++i) c.def(d.lane(i), LaneOp::Fma, {d.lane(i), a.lane(i), b.lane(i)});
    c.zero_upper(d, n);
    return;
  }
  LaneOp op = arith_op(m.substr(1));
  for (std::uint32_t i = 0; i < n; ++i) c.def(d.lane(i), op, {a.lane(i), b.lane(i)});
  c.zero_upper(d, n);
}

void movd(Ctx& c) {
  c.need(2);
  const auto &d = c.a(0), &s = c.a(1);
  if (d.is_vec() && s.is_gpr()) {
    auto bits = static_cast<std::uint32_t>(c.gpr_value(s));
    c.def(d.lane(0), LaneOp::Const, {s.whole()}, bits);
    if (c.e.opcode == "vmovd")
      c.zero_upper(d, 1);
    else
      for (std::uint32_t i = 1; i < 4; ++i) c.def(d.lane(i), LaneOp::Zero);
    return;
  }
  if (d.is_gpr() && s.is_vec()) {
    c.def(int_dst(d), LaneOp::Int, {s.lane(0)});
    return;
  }
  unmodeled(c.e, "unsupported operand combination");
}

void integer(Ctx& c) {
  const std::string& m = c.e.opcode;
  auto srcs_of = [&](const Arg& x) {
    std::vector<Loc> v;
    if (x.is_reg() || x.is_mem()) v.push_back(x.whole());
    if (x.is_mem())
      for (const auto& r : addr_regs(*x.op)) v.push_back(r);
    return v;
  };
  auto emit = [&](Loc dst, std::vector<Loc> srcs) {
    LaneDef d;
    d.dst = dst;
    d.op = LaneOp::Int;
    for (const auto& s : srcs)
      if (d.nsrc < 3) d.src[d.nsrc++] = s;
    c.out.push_back(d);
  };
  if (m == "mov" || m == "movsxd" || m == "movzx" || m == "cvttss2si") {
    c.need(2);
    emit(int_dst(c.a(0)), srcs_of(c.a(1)));
    return;
  }
  if (m == "cdqe") {
    emit(Loc::reg(0, 0, 8), {Loc::reg(0, 0, 4)});
    return;
  }
  if (m == "lea") {
    c.need(2);
    emit(int_dst(c.a(0)), addr_regs(*c.a(1).op));
    return;
  }
  if (m == "xor" && c.args.size() == 2 && c.a(0).is_gpr() && c.a(1).is_gpr() && c.a(0).reg.family == c.a(1).reg.family) {
    emit(int_dst(c.a(0)), {});
    return;
  }
  if (m == "add" || m == "sub" || m == "imul" || m == "shl" || m == "sar" || m == "shr" || m == "and" || m == "or" ||
      m == "xor") {
    const auto& d = c.a(0);
    std::vector<Loc> srcs;
    if (!(m == "imul" && c.args.size() == 3)) srcs.push_back(d.whole());
    for (std::size_t i = 1; i < c.args.size(); ++i)
      for (const auto& l : srcs_of(c.a(i))) srcs.push_back(l);
    emit(int_dst(d), srcs);
    return;
  }
  if (m == "inc" || m == "dec") {
    c.need(1);
    emit(int_dst(c.a(0)), {c.a(0).whole()});
    return;
  }
  if (m == "push") {
    c.need(1);
    if (c.e.writes.empty()) unmodeled(c.e, "push without a recorded stack write");
    emit(Loc::memory(c.e.writes.front().address, c.e.writes.front().width), srcs_of(c.a(0)));
    emit(Loc::reg(4, 0, 8), {Loc::reg(4, 0, 8)});
    return;
  }
  if (m == "pop") {
    c.need(1);
    if (c.e.reads.empty()) unmodeled(c.e, "pop without a recorded stack read");
    emit(int_dst(c.a(0)), {Loc::memory(c.e.reads.front().address, c.e.reads.front().width)});
    emit(Loc::reg(4, 0, 8), {Loc::reg(4, 0, 8)});
    return;
  }
  // cmp, test, jumps, ret, nop, vzeroupper-free control flow: flags only.
}

void call(Ctx& c) {
  c.need(1);
  const auto& t = c.a(0);
  std::string callee;
  if (t.is_imm() && c.calls) {
    auto it = c.calls->find(static_cast<std::uint64_t>(t.op->imm));
    if (it != c.calls->end()) callee = it->second;
  }
  if (callee != "expf") unmodeled(c.e, "call to an unsummarized target");
  const Loc x0 = Loc::reg(kNumGpr, 0, 4);
  c.def(x0, LaneOp::Exp, {x0});
  for (const auto& w : c.e.writes) c.def(Loc::memory(w.address, w.width), LaneOp::Int);
}

void vzeroupper(Ctx& c) {
  for (int f = 0; f < kNumVec; ++f)
    for (std::uint32_t i = 4; i < 8; ++i) c.def(Loc::reg(kNumGpr + f, 4 * i, 4), LaneOp::Zero);
}

using Rule = void (*)(Ctx&);

const std::unordered_map<std::string, Rule>& rules() {
  static const auto table = [] {
    std::unordered_map<std::string, Rule> t;
    for (const char* m : {"movss", "addss", "subss", "mulss", "divss", "maxss", "minss", "sqrtss"}) t[m] = sse_scalar;
    for (const char* m : {"movaps", "movups", "addps", "subps", "mulps", "divps", "maxps", "minps", "sqrtps", "xorps"})
      t[m] = sse_packed;
    for (const char* m : {"vmovss", "vaddss", "vsubss", "vmulss", "vdivss", "vmaxss", "vminss", "vsqrtss", "vfmadd231ss"})
      t[m] = vex_scalar;
    for (const char* m : {"vmovups", "vmovaps", "vbroadcastss", "vaddps", "vsubps", "vmulps", "vdivps", "vmaxps", "vminps",
                          "vsqrtps", "vfmadd231ps", "vxorps", "vpxor", "vhaddps", "vmovhlps", "vmovshdup", "vextractf128"})
      t[m] = vex_packed;
    t["movd"] = movd;
    t["vmovd"] = movd;
    for (const char* m : {"mov", "movsxd", "movzx", "cvttss2si", "cdqe", "lea", "add", "sub", "imul", "shl", "sar", "shr",
                          "and", "or", "xor", "inc", "dec", "push", "pop", "cmp", "test", "jmp", "jl", "jle", "jg", "jge",
                          "je", "jne", "jb", "jae", "ret", "nop"})
      t[m] = integer;
    t["call"] = call;
    t["vzeroupper"] = vzeroupper;
    return t;
  }();
  return table;
}

}  // namespace

std::optional<RegInfo> parse_reg(std::string_view name) {
  const auto& t = reg_table();
  auto it = t.find(std::string(name));
  if (it == t.end()) return std::nullopt;
  return it->second;
}

std::string reg_name(int family, int size) {
  if (family >= kNumGpr) return (size == 32 ? "ymm" : "xmm") + std::to_string(family - kNumGpr);
  switch (size) {
    case 8: return kGpr64[family];
    case 4: return kGpr32[family];
    case 2: return kGpr16[family];
    default: return kGpr8[family];
  }
}

CallTargets call_targets(const TraceBundle& bundle) {
  CallTargets t;
  for (const auto& f : bundle.functions)
    if (!f.name.empty()) t[f.entry] = f.name;
  return t;
}

bool is_modeled(std::string_view opcode) { return rules().count(std::string(opcode)) != 0; }

std::vector<LaneDef> describe(const TraceEntry& entry, const CallTargets* calls) {
  auto it = rules().find(entry.opcode);
  if (it == rules().end()) unmodeled(entry, "opcode outside the modeled subset");
  Ctx c{entry, calls, {}, {}};
  c.args.reserve(entry.operands.size());
  for (const auto& op : entry.operands) {
    Arg a;
    a.op = &op;
    if (op.kind == Operand::Kind::Register) {
      auto r = parse_reg(op.reg);
      if (!r) unmodeled(entry, "unknown register '" + op.reg + "'");
      a.reg = *r;
    }
    c.args.push_back(a);
  }
  it->second(c);
  return std::move(c.out);
}

}  // namespace nnd
