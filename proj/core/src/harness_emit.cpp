// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Per-kernel instruction emission. Each kernel records its prologue, one
// iteration of its outermost loop and its epilogue; the access log covers
// the whole execution analytically.

#include <algorithm>
#include <bit>
#include <map>

#include "harness_internal.hpp"
#include "nndecomp/error.hpp"

namespace nnd::harness {

namespace {

constexpr const char* kArgRegs[] = {"rdi", "rsi", "rdx", "rcx", "r8", "r9"};

std::string X(int i) { return "xmm" + std::to_string(i); }
std::string Y(int i) { return "ymm" + std::to_string(i); }
Operand R(const std::string& r) { return Operand::r(r); }

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t inner_of(const Shape& s) {
  std::int64_t inner = 1;
  for (std::size_t d = 2; d < s.size(); ++d) inner *= s[d];
  return inner;
}

/// Element of `small` read for element `i` of `big` under broadcasting.
struct Bcast {
  std::int64_t small_n, big_n, channels = 1, inner = 1;
  Bcast(const Shape& big, const Shape& small) : small_n(numel(small)), big_n(numel(big)) {
    if (big.size() >= 2) {
      channels = big[1];
      inner = inner_of(big);
    }
  }
  std::int64_t operator()(std::int64_t i) const {
    if (small_n == big_n) return i;
    if (small_n == 1) return 0;
    return (i / inner) % channels;
  }
  bool contiguous(std::int64_t i, int n) const {
    for (int j = 1; j < n; ++j)
      if ((*this)(i + j) != (*this)(i) + j) return false;
    return true;
  }
  bool constant(std::int64_t i, int n) const {
    for (int j = 1; j < n; ++j)
      if ((*this)(i + j) != (*this)(i)) return false;
    return true;
  }
};

class Emitter {
 public:
  Emitter(const Program& p, const Kernel& k, std::uint64_t& seq, std::uint64_t scratch)
      : p_(p), k_(k), st_(p.style.style), vec_(p.style.style != Style::TvmO0 && p.style.lanes >= 8),
        scratch_(scratch), a_(seq, kStackTop - 8) {
    for (std::size_t i = 0; i < k.args.size(); ++i) a_.set(kArgRegs[i], k.args[i]);
    for (std::size_t i = 0; i < k.sig.size(); ++i) {
      const RoleSet& r = k.sig[i];
      auto bind = [&](int t) {
        if (t >= 0 && !reg_.count(t)) reg_[t] = kArgRegs[i];
      };
      if (r.has(Role::Out)) bind(k.out);
      if (r.has(Role::In) || r.has(Role::In1)) bind(k.in);
      if (r.has(Role::In2)) bind(k.in2);
      if (r.has(Role::Weights)) bind(k.weights);
      if (r.has(Role::Biases)) bind(k.bias);
    }
  }

  KernelTrace run();

  static constexpr std::uint64_t kStackTop = 0x7ffe00000000ull;

 private:
  const HTensor& T(int id) const { return p_.tensors.at(static_cast<std::size_t>(id)); }
  const Shape& shape(int id) const { return T(id).shape; }
  const std::string& reg(int t) const {
    auto it = reg_.find(t);
    if (it == reg_.end()) fail(ErrorCode::InvalidArgument, "kernel tensor without an argument register");
    return it->second;
  }
  /// Element `i` (float index in memory order) of tensor `t`.
  Operand el(int t, std::int64_t i, std::uint32_t width = 4) const {
    return a_.at(reg(t), T(t).address + 4 * static_cast<std::uint64_t>(i), width);
  }
  Operand slot(int i) const { return a_.at("rsp", a_.get("rsp") + 4 * static_cast<std::uint64_t>(i), 4); }

  bool o0() const { return st_ == Style::TvmO0; }
  bool glow() const { return st_ == Style::Glow; }

  // Scalar float helpers (lane 0).
  void fzero(int r) {
    if (o0())
      a_.emit("xorps", {R(X(r)), R(X(r))});
    else if (glow())
      a_.emit("vpxor", {R(X(r)), R(X(r)), R(X(r))});
    else
      a_.emit("vxorps", {R(X(r)), R(X(r)), R(X(r))});
  }
  void fload(int r, const Operand& m) { a_.emit(o0() ? "movss" : "vmovss", {R(X(r)), m}); }
  void fstore(const Operand& m, int r) { a_.emit(o0() ? "movss" : "vmovss", {m, R(X(r))}); }
  void fbin(const std::string& op, int d, const Operand& src) {
    if (o0())
      a_.emit(op + "ss", {R(X(d)), src});
    else
      a_.emit("v" + op + "ss", {R(X(d)), R(X(d)), src});
  }
  void fsqrt(int d, const Operand& src) {
    if (o0())
      a_.emit("sqrtss", {R(X(d)), src});
    else
      a_.emit("vsqrtss", {R(X(d)), R(X(d)), src});
  }
  /// acc += x * w
  void fmac(int acc, int x, const Operand& w, int tmp) {
    if (o0()) {
      a_.emit("mulss", {R(X(x)), w});
      a_.emit("addss", {R(X(acc)), R(X(x))});
    } else if (glow()) {
      a_.emit("vmulss", {R(X(tmp)), R(X(x)), w});
      a_.emit("vaddss", {R(X(acc)), R(X(acc)), R(X(tmp))});
    } else {
      a_.emit("vfmadd231ss", {R(X(acc)), R(X(x)), w});
    }
  }
  void fconst(int r, float v) {
    a_.mov("eax", static_cast<std::int64_t>(std::bit_cast<std::uint32_t>(v)));
    a_.emit(o0() ? "movd" : "vmovd", {R(X(r)), R("eax")});
  }

  // Packed helpers (8 lanes).
  void vzero(int r) { a_.emit(glow() ? "vpxor" : "vxorps", {R(Y(r)), R(Y(r)), R(Y(r))}); }
  void vload(int r, const Operand& m) { a_.emit("vmovups", {R(Y(r)), m}); }
  void vstore(const Operand& m, int r) { a_.emit("vmovups", {m, R(Y(r))}); }
  void vbcast(int r, const Operand& m) { a_.emit("vbroadcastss", {R(Y(r)), m}); }
  void vbin(const std::string& op, int d, int a, const Operand& src) {
    a_.emit("v" + op + "ps", {R(Y(d)), R(Y(a)), src});
  }
  void vmac(int acc, int x, const Operand& w, int tmp) {
    if (glow()) {
      a_.emit("vmulps", {R(Y(tmp)), R(Y(x)), w});
      a_.emit("vaddps", {R(Y(acc)), R(Y(acc)), R(Y(tmp))});
    } else {
      a_.emit("vfmadd231ps", {R(Y(acc)), R(Y(x)), w});
    }
  }

  void zero_reg() {
    if (vec_)
      vzero(15);
    else
      fzero(15);
  }

  /// Copies n floats, 8 at a time where possible.
  void copy(int src, std::int64_t si, int dst, std::int64_t di, std::int64_t n) {
    std::int64_t j = 0;
    if (vec_)
      for (; j + 8 <= n; j += 8) {
        vload(0, el(src, si + j, 32));
        vstore(el(dst, di + j, 32), 0);
        a_.add("r8", 32);
      }
    for (; j < n; ++j) {
      fload(0, el(src, si + j));
      fstore(el(dst, di + j), 0);
      a_.inc("r8");
    }
  }

  void prologue(bool frame);
  void epilogue(bool frame);
  void marker();

  void conv();
  void conv_cols();
  void im2col();
  void dense();
  void eltwise();
  void pool();
  void lrn();
  void softmax();
  void embedding();
  void copy_kernel();
  void insert_tensor();
  void memset();

  void access();
  void read_all(int t) {
    if (t < 0) return;
    auto n = T(t).param ? static_cast<std::int64_t>(T(t).stored.size()) : numel(shape(t));
    read_range(t, 0, n);
  }
  void write_all(int t) {
    if (t >= 0) write_range(t, 0, numel(shape(t)));
  }
  void read_range(int t, std::int64_t lo, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) log_.reads.push_back({T(t).address + 4 * static_cast<std::uint64_t>(lo + i), 4});
  }
  void write_range(int t, std::int64_t lo, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) log_.writes.push_back({T(t).address + 4 * static_cast<std::uint64_t>(lo + i), 4});
  }

  const Program& p_;
  const Kernel& k_;
  Style st_;
  bool vec_;
  std::uint64_t scratch_;
  Asm a_;
  std::map<int, std::string> reg_;
  MemAccessLog log_;
};

void Emitter::prologue(bool frame) {
  switch (st_) {
    case Style::TvmO0: {
      a_.push("rbp");
      a_.mov_rr("rbp", "rsp");
      a_.sub("rsp", 64);
      const auto rbp = a_.get("rbp");
      for (std::size_t i = 0; i < k_.args.size(); ++i) a_.store(a_.at("rbp", rbp - 8 * (i + 1), 8), kArgRegs[i]);
      for (std::size_t i = 0; i < k_.args.size(); ++i)
        a_.load(kArgRegs[i], a_.at("rbp", rbp - 8 * (i + 1), 8), k_.args[i]);
      break;
    }
    case Style::TvmO3:
      for (const char* r : {"r15", "r14", "r13", "r12", "rbx"}) a_.push(r);
      if (frame) a_.sub("rsp", 16);
      break;
    case Style::Glow:
      for (const char* r : {"rbp", "r15", "r14", "rbx"}) a_.push(r);
      if (frame) a_.sub("rsp", 16);
      break;
  }
  if (!k_.labels.empty()) marker();
}

void Emitter::epilogue(bool frame) {
  switch (st_) {
    case Style::TvmO0:
      a_.add("rsp", 64);
      a_.pop("rbp");
      break;
    case Style::TvmO3:
      if (frame) a_.add("rsp", 16);
      a_.emit("vzeroupper", {});
      for (const char* r : {"rbx", "r12", "r13", "r14", "r15"}) a_.pop(r);
      break;
    case Style::Glow:
      if (frame) a_.add("rsp", 16);
      a_.emit("vzeroupper", {});
      for (const char* r : {"rbx", "r14", "r15", "rbp"}) a_.pop(r);
      break;
  }
  a_.ret();
}

// Index arithmetic typical of each operator's loop nest.
void Emitter::marker() {
  switch (k_.anchor) {
    case OpKind::Conv:
      a_.mov("eax", shape(k_.in)[2]);
      a_.imul("rax", "rax", k_.op.iattr("K"));
      a_.imul("r11", "rax", 4);
      a_.lea("rax", a_.at("rax", "r11", 1, a_.get("rax") + a_.get("r11"), 4));
      break;
    case OpKind::Dense:
      a_.mov("eax", k_.op.iattr("M"));
      a_.shl("rax", 2);
      a_.lea("r11", a_.at("rax", a_.get("rax") + 32, 4));
      break;
    case OpKind::BiasAdd:
      a_.mov("eax", numel(shape(k_.out)));
      a_.movsxd("r11", "eax");
      a_.sar("r11", 3);
      a_.lea("rax", a_.at("r11", a_.get("r11") * 1 + 7, 4));
      break;
    case OpKind::Add:
      a_.mov("eax", numel(shape(k_.out)));
      a_.cdqe();
      a_.shl("rax", 2);
      a_.add_rr("rax", "r11");
      break;
    case OpKind::Multiply:
      a_.mov("eax", numel(shape(k_.out)));
      a_.cdqe();
      a_.imul("r11", "rax", 4);
      a_.add("r11", 4);
      break;
    case OpKind::Divide:
      a_.mov("eax", numel(shape(k_.out)));
      a_.cdqe();
      a_.sar("rax", 2);
      a_.sub("rax", 1);
      break;
    case OpKind::ReLU:
      a_.mov("eax", numel(shape(k_.out)));
      a_.shr("eax", 3);
      a_.lea("r11", a_.at("rax", a_.get("rax") + 1, 4));
      break;
    case OpKind::Sqrt:
      a_.mov("eax", numel(shape(k_.out)));
      a_.shr("eax", 2);
      a_.shl("rax", 2);
      break;
    case OpKind::Negative:
      a_.mov("eax", numel(shape(k_.out)));
      a_.sar("eax", 1);
      a_.shl("rax", 1);
      break;
    case OpKind::MaxPool:
    case OpKind::AvgPool:
      a_.mov("eax", shape(k_.in)[2]);
      a_.imul("r11", "rax", k_.op.iattr("S"));
      a_.shl("r11", 2);
      a_.cmp("r11", 0);
      break;
    case OpKind::LRN:
      a_.mov("eax", shape(k_.in)[1]);
      a_.imul("r11", "rax", inner_of(shape(k_.in)));
      a_.sub("rax", 1);
      a_.cmp("rax", 0);
      break;
    case OpKind::Softmax:
      a_.mov("eax", numel(shape(k_.in)));
      a_.test("eax");
      break;
    case OpKind::Embedding:
      a_.mov("eax", shape(k_.out).back());
      a_.shl("rax", 2);
      break;
    case OpKind::Concat:
      a_.mov("eax", numel(shape(k_.in)));
      a_.lea("r11", a_.at("rax", a_.get("rax") * 1 + 0, 4));
      a_.lea("rax", a_.at("r11", a_.get("r11") + 8, 4));
      a_.sub("rax", 8);
      break;
    case OpKind::Split:
      a_.mov("eax", static_cast<std::int64_t>(k_.offset));
      a_.movsxd("r11", "eax");
      a_.imul("r11", "r11", 4);
      break;
    case OpKind::Flatten:
      a_.mov("eax", numel(shape(k_.out)));
      a_.shr("eax", 3);
      a_.shl("eax", 3);
      break;
    case OpKind::ExpandDims:
      a_.mov("eax", numel(shape(k_.out)));
      a_.sar("eax", 3);
      a_.sar("eax", 1);
      break;
    case OpKind::Reshape:
      a_.mov("eax", shape(k_.out)[0]);
      a_.imul("r11", "rax", shape(k_.out)[1]);
      a_.sar("r11", 1);
      a_.imul("rax", "r11", 4);
      break;
    case OpKind::InsertTensor:
      a_.mov("eax", shape(k_.out)[2]);
      a_.imul("r11", "rax", shape(k_.out)[2]);
      a_.add_rr("r11", "rax");
      a_.lea("rax", a_.at("r11", a_.get("r11") + 1, 4));
      break;
    default:
      a_.mov("eax", 0);
      break;
  }
}

void Emitter::conv() {
  const auto K = k_.op.iattr("K"), S = k_.op.iattr("S"), P = k_.op.iattr("P");
  const auto IC = k_.op.iattr("I_C");
  const auto H = shape(k_.in)[2], OH = shape(k_.out)[2];
  const LayoutOpt& L = k_.layout;
  const bool vector = vec_ && L.kind != LayoutOpt::Kind::None;
  const int block = L.kind == LayoutOpt::Kind::Tvm6d ? L.B : L.kind == LayoutOpt::Kind::Glow5d ? L.A : 1;
  const int groups = vector ? block / 8 : 1;
  const std::int64_t A = L.kind == LayoutOpt::Kind::Tvm6d ? L.A : 1;
  const std::int64_t rows = std::min(OH, ceil_div(P, S) + 1);
  auto wel = [&](std::int64_t oc, std::int64_t ic, std::int64_t ky, std::int64_t kx, std::uint32_t width) {
    return el(k_.weights, static_cast<std::int64_t>(layout_index(L, oc, ic, ky, kx, IC, K)), width);
  };

  if (k_.relu) zero_reg();
  if (vector) a_.mov("rbx", static_cast<std::int64_t>(scratch_));
  a_.zero("r8d");
  a_.zero("r9d");
  for (std::int64_t oy = 0; oy < rows; ++oy) {
    a_.zero("r10d");
    for (std::int64_t ox = 0; ox < OH; ++ox) {
      for (int g = 0; g < groups; ++g) vector ? vzero(g) : fzero(0);
      a_.zero("r11d");
      for (std::int64_t icb = 0; icb < IC / A; ++icb) {
        a_.zero("r12d");
        for (std::int64_t ky = 0; ky < K; ++ky) {
          const std::int64_t iy = oy * S - P + ky;
          if (P > 0) {
            a_.mov("eax", iy);
            a_.cmp("eax", H);
            a_.jcc("jae", 0);
          }
          if (iy >= 0 && iy < H) {
            if (A > 1) a_.zero("r13d");
            for (std::int64_t ici = 0; ici < A; ++ici) {
              const std::int64_t ic = icb * A + ici;
              if (o0()) a_.zero("r14d");
              for (std::int64_t kxi = 0; kxi < K; ++kxi) {
                const std::int64_t kx = p_.options.adversarial ? K - 1 - kxi : kxi;
                const std::int64_t ix = ox * S - P + kx;
                if (P > 0) {
                  a_.mov("eax", ix);
                  a_.cmp("eax", H);
                  a_.jcc("jae", 0);
                }
                if (ix >= 0 && ix < H) {
                  const Operand x = el(k_.in, (ic * H + iy) * H + ix);
                  if (vector) {
                    vbcast(8, x);
                    for (int g = 0; g < groups; ++g) vmac(g, 8, wel(8 * g, ic, ky, kx, 32), 9);
                  } else {
                    fload(1, x);
                    fmac(0, 1, wel(0, ic, ky, kx, 4), 2);
                  }
                }
                if (o0()) a_.loop_tail("r14", K);
              }
              if (A > 1) a_.loop_tail("r13", A);
            }
          }
          a_.loop_tail("r12", K);
        }
        a_.loop_tail("r11", IC / A);
      }
      if (vector) {
        for (int g = 0; g < groups; ++g) {
          if (k_.bias >= 0) vbin("add", g, g, el(k_.bias, 8 * g, 32));
          if (k_.relu) vbin("max", g, g, R(Y(15)));
          vstore(a_.at("rbx", scratch_ + 32 * static_cast<std::uint64_t>(g), 32), g);
        }
        for (int j = 0; j < block; ++j) {
          fload(10, a_.at("rbx", scratch_ + 4 * static_cast<std::uint64_t>(j), 4));
          fstore(el(k_.out, (j * OH + oy) * OH + ox), 10);
        }
      } else {
        if (k_.bias >= 0) fbin("add", 0, el(k_.bias, 0));
        if (k_.relu) fbin("max", 0, R(X(15)));
        fstore(el(k_.out, oy * OH + ox), 0);
      }
      a_.loop_tail("r10", OH);
    }
    a_.loop_tail("r9", OH);
  }
}

void Emitter::conv_cols() {
  const auto K = k_.op.iattr("K"), IC = k_.op.iattr("I_C");
  const auto OH = shape(k_.out)[2];
  const std::int64_t n = IC * K * K;
  if (k_.relu) zero_reg();
  a_.zero("r10d");
  for (std::int64_t p = 0; p < OH; ++p) {
    fzero(0);
    a_.zero("r11d");
    for (std::int64_t j = 0; j < n; ++j) {
      fload(1, el(k_.in, p * n + j));
      fmac(0, 1, el(k_.weights, j), 2);
      a_.loop_tail("r11", n);
    }
    if (k_.bias >= 0) fbin("add", 0, el(k_.bias, 0));
    if (k_.relu) fbin("max", 0, R(X(15)));
    fstore(el(k_.out, p), 0);
    a_.loop_tail("r10", OH * OH);
  }
}

void Emitter::im2col() {
  const auto K = k_.op.iattr("K"), S = k_.op.iattr("S"), P = k_.op.iattr("P"), IC = k_.op.iattr("I_C");
  const auto H = shape(k_.in)[2];
  const std::int64_t OH = *window_out(H, K, S, P), n = IC * K * K;
  fzero(15);
  a_.zero("r10d");
  for (std::int64_t ox = 0; ox < OH; ++ox) {
    a_.zero("r11d");
    for (std::int64_t ic = 0; ic < IC; ++ic)
      for (std::int64_t ky = 0; ky < K; ++ky)
        for (std::int64_t kx = 0; kx < K; ++kx) {
          const std::int64_t iy = ky - P, ix = ox * S - P + kx, j = (ic * K + ky) * K + kx;
          if (P > 0) {
            a_.mov("eax", ix);
            a_.cmp("eax", H);
            a_.jcc("jae", 0);
          }
          if (iy >= 0 && iy < H && ix >= 0 && ix < H) {
            fload(0, el(k_.in, (ic * H + iy) * H + ix));
            fstore(el(k_.out, ox * n + j), 0);
          } else {
            fstore(el(k_.out, ox * n + j), 15);
          }
          a_.loop_tail("r11", n);
        }
    a_.loop_tail("r10", OH * OH);
  }
}

void Emitter::dense() {
  const auto M = k_.op.iattr("M"), N = k_.op.iattr("N");
  if (k_.relu) zero_reg();
  a_.zero("r10d");
  for (std::int64_t n = 0; n < std::min<std::int64_t>(N, 4); ++n) {
    a_.zero("r11d");
    if (!vec_) {
      fzero(0);
      for (std::int64_t m = 0; m < M; ++m) {
        fload(1, el(k_.in, m));
        fmac(0, 1, el(k_.weights, n * M + m), 2);
        a_.loop_tail("r11", M);
      }
    } else {
      const std::int64_t M8 = M / 8 * 8;
      if (M8 > 0) {
        vzero(0);
        for (std::int64_t m = 0; m < M8; m += 8) {
          vload(1, el(k_.in, m, 32));
          vmac(0, 1, el(k_.weights, n * M + m, 32), 2);
          a_.add("r11", 8);
          a_.cmp("r11", M8);
          a_.jcc("jl", 0);
        }
        a_.emit("vextractf128", {R(X(1)), R(Y(0)), Operand::i(1)});
        a_.emit("vaddps", {R(X(0)), R(X(0)), R(X(1))});
        if (glow()) {
          a_.emit("vmovhlps", {R(X(1)), R(X(1)), R(X(0))});
          a_.emit("vaddps", {R(X(0)), R(X(0)), R(X(1))});
          a_.emit("vmovshdup", {R(X(1)), R(X(0))});
          a_.emit("vaddss", {R(X(0)), R(X(0)), R(X(1))});
        } else {
          a_.emit("vhaddps", {R(X(0)), R(X(0)), R(X(0))});
          a_.emit("vhaddps", {R(X(0)), R(X(0)), R(X(0))});
        }
      }
      if (M8 < M) {
        const int acc = M8 > 0 ? 3 : 0;
        fzero(acc);
        for (std::int64_t m = M8; m < M; ++m) {
          fload(1, el(k_.in, m));
          fmac(acc, 1, el(k_.weights, n * M + m), 2);
          a_.loop_tail("r11", M);
        }
        if (M8 > 0) fbin("add", 0, R(X(3)));
      }
    }
    if (k_.bias >= 0) fbin("add", 0, el(k_.bias, n));
    if (k_.relu) fbin("max", 0, R(X(15)));
    fstore(el(k_.out, n), 0);
    a_.loop_tail("r10", N);
  }
}

void Emitter::eltwise() {
  const Shape& so = shape(k_.out);
  const std::int64_t total = numel(so), E = std::min<std::int64_t>(total, 32);
  const int b = k_.kk == KKind::BiasAdd ? k_.bias : k_.kk == KKind::Binary ? k_.in2 : -1;
  const Bcast ia(so, shape(k_.in));
  const Bcast ib(so, b >= 0 ? shape(b) : so);
  const OpKind op = k_.kk == KKind::BiasAdd ? OpKind::Add : k_.elem;
  const std::string name = op == OpKind::Multiply ? "mul" : op == OpKind::Divide ? "div" : "add";
  if (k_.relu || op == OpKind::ReLU) zero_reg();
  a_.zero("r8d");
  for (std::int64_t i = 0; i < E;) {
    const bool a_ok = ia.contiguous(i, 8) || ia.constant(i, 8);
    const bool b_ok = b < 0 || ib.contiguous(i, 8) || ib.constant(i, 8);
    if (vec_ && i + 8 <= E && a_ok && b_ok) {
      const bool ac = ia.contiguous(i, 8);
      auto load_a = [&](int r) { ac ? vload(r, el(k_.in, ia(i), 32)) : vbcast(r, el(k_.in, ia(i))); };
      switch (op) {
        case OpKind::ReLU:
          load_a(0);
          vbin("max", 0, 0, R(Y(15)));
          break;
        case OpKind::Sqrt:
          if (ac) {
            a_.emit("vsqrtps", {R(Y(0)), el(k_.in, ia(i), 32)});
          } else {
            load_a(0);
            a_.emit("vsqrtps", {R(Y(0)), R(Y(0))});
          }
          break;
        case OpKind::Negative:
          load_a(1);
          vzero(0);
          vbin("sub", 0, 0, R(Y(1)));
          break;
        default:
          load_a(0);
          if (ib.contiguous(i, 8)) {
            vbin(name, 0, 0, el(b, ib(i), 32));
          } else {
            vbcast(1, el(b, ib(i)));
            vbin(name, 0, 0, R(Y(1)));
          }
      }
      if (k_.relu && op != OpKind::ReLU) vbin("max", 0, 0, R(Y(15)));
      vstore(el(k_.out, i, 32), 0);
      a_.add("r8", 8);
      a_.cmp("r8", total);
      a_.jcc("jl", 0);
      i += 8;
      continue;
    }
    const Operand x = el(k_.in, ia(i));
    switch (op) {
      case OpKind::ReLU:
        fload(0, x);
        fbin("max", 0, R(X(15)));
        break;
      case OpKind::Sqrt: fsqrt(0, x); break;
      case OpKind::Negative:
        fzero(0);
        fbin("sub", 0, x);
        break;
      default:
        fload(0, x);
        fbin(name, 0, el(b, ib(i)));
    }
    if (k_.relu && op != OpKind::ReLU) fbin("max", 0, R(X(15)));
    fstore(el(k_.out, i), 0);
    a_.loop_tail("r8", total);
    ++i;
  }
}

void Emitter::pool() {
  const auto K = k_.op.iattr("K"), S = k_.op.iattr("S");
  const auto H = shape(k_.in)[2], OH = shape(k_.out)[2];
  const bool is_max = k_.elem == OpKind::MaxPool;
  a_.zero("r10d");
  for (std::int64_t ox = 0; ox < OH; ++ox) {
    if (!is_max) fzero(0);
    a_.zero("r12d");
    for (std::int64_t ky = 0; ky < K; ++ky) {
      for (std::int64_t kx = 0; kx < K; ++kx) {
        const Operand x = el(k_.in, ky * H + ox * S + kx);
        if (is_max && ky == 0 && kx == 0)
          fload(0, x);
        else
          fbin(is_max ? "max" : "add", 0, x);
      }
      a_.loop_tail("r12", K);
    }
    if (!is_max) {
      fconst(1, 1.0f / static_cast<float>(K * K));
      fbin("mul", 0, R(X(1)));
    }
    fstore(el(k_.out, ox), 0);
    a_.loop_tail("r10", OH);
  }
}

void Emitter::lrn() {
  const auto n = k_.op.iattr("size");
  const float alpha = static_cast<float>(k_.op.attr_or("alpha", 1e-4));
  const float bias = static_cast<float>(k_.op.attr_or("bias", 1.0));
  const float scale = alpha / static_cast<float>(n);
  const auto C = shape(k_.in)[1];
  const auto inner = inner_of(shape(k_.in));
  const std::int64_t lo_off = (n - 1) / 2, hi_off = n / 2;
  a_.zero("r10d");
  for (std::int64_t c = 0; c < C; ++c) {
    fzero(0);
    a_.zero("r11d");
    for (std::int64_t cc = std::max<std::int64_t>(0, c - lo_off); cc <= std::min(C - 1, c + hi_off); ++cc) {
      fload(1, el(k_.in, cc * inner));
      fbin("mul", 1, R(X(1)));
      fbin("add", 0, R(X(1)));
      a_.loop_tail("r11", n);
    }
    fconst(2, scale);
    fbin("mul", 0, R(X(2)));
    fconst(2, bias);
    fbin("add", 0, R(X(2)));
    fsqrt(3, R(X(0)));
    fsqrt(4, R(X(3)));
    fbin("mul", 3, R(X(4)));
    fload(5, el(k_.in, c * inner));
    fbin("div", 5, R(X(3)));
    fstore(el(k_.out, c * inner), 5);
    a_.loop_tail("r10", C);
  }
}

void Emitter::softmax() {
  const std::int64_t N = numel(shape(k_.in));
  a_.zero("r8d");
  fload(0, el(k_.in, 0));
  for (std::int64_t i = 1; i < N; ++i) {
    fbin("max", 0, el(k_.in, i));
    a_.loop_tail("r8", N);
  }
  fstore(slot(0), 0);
  fzero(0);
  fstore(slot(1), 0);
  a_.zero("r8d");
  for (std::int64_t i = 0; i < N; ++i) {
    fload(0, el(k_.in, i));
    fbin("sub", 0, slot(0));
    a_.call(p_.expf_entry);
    fstore(el(k_.out, i), 0);
    fbin("add", 0, slot(1));
    fstore(slot(1), 0);
    a_.loop_tail("r8", N);
  }
  a_.zero("r8d");
  for (std::int64_t i = 0; i < N; ++i) {
    fload(0, el(k_.out, i));
    fbin("div", 0, slot(1));
    fstore(el(k_.out, i), 0);
    a_.loop_tail("r8", N);
  }
}

void Emitter::embedding() {
  const auto D = shape(k_.weights)[1];
  const auto idx = static_cast<std::int64_t>(T(k_.in).value[0]);
  a_.cvttss2si("eax", el(k_.in, 0), idx);
  a_.cdqe();
  a_.imul("rax", "rax", D * 4);
  a_.add_rr("rax", reg(k_.weights));
  const std::uint64_t row = T(k_.weights).address + 4 * static_cast<std::uint64_t>(idx * D);
  std::int64_t d = 0;
  if (vec_)
    for (; d + 8 <= D; d += 8) {
      vload(0, a_.at("rax", row + 4 * static_cast<std::uint64_t>(d), 32));
      vstore(el(k_.out, d, 32), 0);
    }
  for (; d < D; ++d) {
    fload(0, a_.at("rax", row + 4 * static_cast<std::uint64_t>(d), 4));
    fstore(el(k_.out, d), 0);
  }
  a_.loop_tail("r10", numel(shape(k_.in)));
}

void Emitter::copy_kernel() {
  a_.zero("r8d");
  const std::int64_t n_out = numel(shape(k_.out));
  switch (k_.kk) {
    case KKind::Concat: {
      const std::int64_t n1 = numel(shape(k_.in)), n2 = numel(shape(k_.in2));
      copy(k_.in, 0, k_.out, 0, std::min<std::int64_t>(n1, 32));
      a_.cmp("r8", n1);
      a_.jcc("jl", 0);
      copy(k_.in2, 0, k_.out, n1, std::min<std::int64_t>(n2, 32));
      break;
    }
    case KKind::Split: copy(k_.in, k_.offset, k_.out, 0, std::min<std::int64_t>(n_out, 32)); break;
    default: copy(k_.in, 0, k_.out, 0, std::min<std::int64_t>(n_out, 32)); break;
  }
  a_.cmp("r8", n_out);
  a_.jcc("jl", 0);
}

void Emitter::insert_tensor() {
  const auto Hs = shape(k_.in2)[2], Hp = shape(k_.out)[2];
  a_.zero("r9d");
  for (std::int64_t y = 0; y < Hs; ++y) {
    a_.zero("r8d");
    copy(k_.in2, y * Hs, k_.out, k_.offset + y * Hp, Hs);
    a_.loop_tail("r9", Hs);
  }
}

void Emitter::memset() {
  const std::int64_t n = std::min<std::int64_t>(numel(shape(k_.out)), 32);
  a_.zero("r8d");
  std::int64_t i = 0;
  if (vec_) {
    vzero(0);
    for (; i + 8 <= n; i += 8) {
      vstore(el(k_.out, i, 32), 0);
      a_.add("r8", 32);
    }
  } else {
    fzero(0);
  }
  for (; i < n; ++i) {
    fstore(el(k_.out, i), 0);
    a_.add("r8", 4);
  }
  a_.cmp("r8", numel(shape(k_.out)) * 4);
  a_.jcc("jb", 0);
}

void Emitter::access() {
  switch (k_.kk) {
    case KKind::Split:
      read_range(k_.in, k_.offset, numel(shape(k_.out)));
      write_all(k_.out);
      break;
    case KKind::Embedding: {
      read_all(k_.in);
      const auto D = shape(k_.weights)[1];
      for (float v : T(k_.in).value.data()) read_range(k_.weights, static_cast<std::int64_t>(v) * D, D);
      write_all(k_.out);
      break;
    }
    case KKind::InsertTensor: {
      read_all(k_.in2);
      const auto C = shape(k_.in2)[1], Hs = shape(k_.in2)[2], Hp = shape(k_.out)[2];
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < Hs; ++y) write_range(k_.out, k_.offset + c * Hp * Hp + y * Hp, Hs);
      break;
    }
    case KKind::Memset: write_all(k_.out); break;
    default:
      read_all(k_.in);
      read_all(k_.in2);
      read_all(k_.weights);
      read_all(k_.bias);
      write_all(k_.out);
  }
  log_.reads.insert(log_.reads.end(), a_.accesses_read().begin(), a_.accesses_read().end());
  log_.writes.insert(log_.writes.end(), a_.accesses_written().begin(), a_.accesses_written().end());
}

KernelTrace Emitter::run() {
  const bool frame = k_.kk == KKind::Softmax;
  prologue(frame);
  switch (k_.kk) {
    case KKind::Conv: conv(); break;
    case KKind::ConvCols: conv_cols(); break;
    case KKind::Im2col: im2col(); break;
    case KKind::Dense: dense(); break;
    case KKind::BiasAdd:
    case KKind::Binary:
    case KKind::Unary: eltwise(); break;
    case KKind::Pool: pool(); break;
    case KKind::LRN: lrn(); break;
    case KKind::Softmax: softmax(); break;
    case KKind::Embedding: embedding(); break;
    case KKind::Concat:
    case KKind::Split:
    case KKind::Copy: copy_kernel(); break;
    case KKind::InsertTensor: insert_tensor(); break;
    case KKind::Memset: memset(); break;
  }
  epilogue(frame);
  access();
  KernelTrace kt;
  kt.listing = a_.listing();
  kt.trace = a_.take_trace();
  log_.func_id = k_.func_id;
  log_.normalize();
  kt.access = std::move(log_);
  return kt;
}

}  // namespace

KernelTrace emit_kernel(const Program& prog, const Kernel& k, std::uint64_t& seq, std::uint64_t scratch) {
  return Emitter(prog, k, seq, scratch).run();
}

std::vector<std::string> expf_listing() {
  return {"vmovd",    "and",         "cmp",         "jae",        "vcvtss2sd", "vmulsd", "vroundsd", "vsubsd",
          "vmulsd",   "vfmadd213sd", "vfmadd213sd", "vcvttsd2si", "shl",       "vmovq",  "vmulsd",   "vcvtsd2ss",
          "ret"};
}

std::vector<std::string> main_listing(const Program& prog) {
  std::vector<std::string> out;
  switch (prog.style.style) {
    case Style::TvmO0: out = {"push", "mov", "sub", "mov", "mov"}; break;
    case Style::TvmO3: out = {"push", "push", "push", "sub", "vzeroupper"}; break;
    case Style::Glow: out = {"push", "push", "mov", "lea", "call"}; break;
  }
  for (const auto& k : prog.kernels) {
    for (const auto& r : k.sig) out.push_back(r.has(Role::Offset) || r.has(Role::Dims) ? "mov" : "lea");
    out.push_back("call");
  }
  for (const char* m : {"xor", "add", "pop", "ret"}) out.push_back(m);
  return out;
}

std::size_t layout_index(const LayoutOpt& l, std::int64_t oc, std::int64_t ic, std::int64_t ky, std::int64_t kx,
                         std::int64_t I_C, std::int64_t K) {
  std::int64_t i = 0;
  switch (l.kind) {
    case LayoutOpt::Kind::None: i = ((oc * I_C + ic) * K + ky) * K + kx; break;
    case LayoutOpt::Kind::Glow5d: i = ((((oc / l.A) * I_C + ic) * K + ky) * K + kx) * l.A + oc % l.A; break;
    case LayoutOpt::Kind::Tvm6d:
      i = ((((oc / l.B) * (I_C / l.A) + ic / l.A) * K + ky) * K + kx) * l.A * l.B + (ic % l.A) * l.B + oc % l.B;
      break;
  }
  return static_cast<std::size_t>(i);
}

}  // namespace nnd::harness
