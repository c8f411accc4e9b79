// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Shared pieces of the code generator: the instruction recorder and the
// lowered kernel description.

#pragma once

#include <array>
#include <cstdint>
#include <source_location>
#include <string>
#include <unordered_set>
#include <vector>

#include "nndecomp/bundle.hpp"
#include "nndecomp/harness.hpp"
#include "nndecomp/model.hpp"
#include "nndecomp/signatures.hpp"

namespace nnd::harness {

using SL = std::source_location;

/// Records executed instructions with their concrete context. General
/// register values are simulated so that every memory operand resolves;
/// floating-point values are not.
class Asm {
 public:
  Asm(std::uint64_t& seq, std::uint64_t stack_top);

  void set(const std::string& reg, std::uint64_t value);
  std::uint64_t get(const std::string& reg) const;

  /// [base + disp] addressing `address`.
  Operand at(const std::string& base, std::uint64_t address, std::uint32_t width) const;
  /// [base + index*scale + disp] addressing `address`.
  Operand at(const std::string& base, const std::string& index, std::uint32_t scale, std::uint64_t address,
             std::uint32_t width) const;

  /// Generic instruction; reads and writes are derived from its semantics.
  void emit(const std::string& mnemonic, std::vector<Operand> ops, SL loc = SL::current());

  // Integer instructions that update the simulated register file.
  void mov(const std::string& dst, std::int64_t imm, SL loc = SL::current());
  void mov_rr(const std::string& dst, const std::string& src, SL loc = SL::current());
  void load(const std::string& dst, const Operand& mem, std::uint64_t value, SL loc = SL::current());
  void store(const Operand& mem, const std::string& src, SL loc = SL::current());
  void add(const std::string& dst, std::int64_t imm, SL loc = SL::current());
  void add_rr(const std::string& dst, const std::string& src, SL loc = SL::current());
  void sub(const std::string& dst, std::int64_t imm, SL loc = SL::current());
  void imul(const std::string& dst, const std::string& src, std::int64_t imm, SL loc = SL::current());
  void shl(const std::string& dst, int n, SL loc = SL::current());
  void sar(const std::string& dst, int n, SL loc = SL::current());
  void shr(const std::string& dst, int n, SL loc = SL::current());
  void lea(const std::string& dst, const Operand& mem, SL loc = SL::current());
  void inc(const std::string& dst, SL loc = SL::current());
  void zero(const std::string& dst, SL loc = SL::current());
  void movsxd(const std::string& dst, const std::string& src, SL loc = SL::current());
  void cdqe(SL loc = SL::current());
  void cvttss2si(const std::string& dst, const Operand& mem, std::int64_t value, SL loc = SL::current());
  void cmp(const std::string& reg, std::int64_t imm, SL loc = SL::current());
  void cmp_rr(const std::string& a, const std::string& b, SL loc = SL::current());
  void test(const std::string& reg, SL loc = SL::current());
  void jcc(const std::string& cc, std::uint64_t target, SL loc = SL::current());
  void push(const std::string& reg, SL loc = SL::current());
  void pop(const std::string& reg, SL loc = SL::current());
  void ret(SL loc = SL::current());
  void call(std::uint64_t target, SL loc = SL::current());
  /// Loop back-edge bookkeeping: inc counter, compare with bound, branch.
  void loop_tail(const std::string& counter, std::int64_t bound, SL loc = SL::current());

  std::vector<TraceEntry> take_trace() { return std::move(trace_); }
  const std::vector<std::string>& listing() const { return listing_; }
  /// Every memory access recorded so far.
  const std::vector<MemRef>& accesses_read() const { return reads_; }
  const std::vector<MemRef>& accesses_written() const { return writes_; }

 private:
  int family(const std::string& reg) const;
  void write_gpr(const std::string& reg, std::uint64_t value);
  void record(TraceEntry e, SL loc);

  std::uint64_t& seq_;
  std::array<std::uint64_t, 16> gpr_{};
  std::vector<TraceEntry> trace_;
  std::vector<std::string> listing_;
  std::unordered_set<std::string> sites_;
  std::vector<MemRef> reads_, writes_;
};

/// A tensor in the lowered program.
struct HTensor {
  std::string name;
  Shape shape;
  bool param = false;
  Tensor value;               // logical (canonical order) contents
  std::vector<float> stored;  // parameters: contents in memory order
  std::uint64_t address = 0;
  int alias_of = -1;  // in-place outputs share the buffer of their input
};

enum class KKind {
  Conv,
  ConvCols,  // convolution over an im2col matrix
  Im2col,
  Dense,
  BiasAdd,
  Binary,
  Unary,
  Pool,
  LRN,
  Softmax,
  Embedding,
  Concat,
  Split,
  Copy,
  InsertTensor,
  Memset,
};

struct Kernel {
  KKind kk = KKind::Copy;
  std::vector<OpKind> labels;  // empty for utility calls
  OpKind anchor = OpKind::Add;  // selects the signature
  OpKind elem = OpKind::Add;   // Binary / Unary / Pool flavor
  std::vector<std::string> source_ops;
  int in = -1, in2 = -1, out = -1, weights = -1, bias = -1;
  bool relu = false;
  bool in_place = false;
  OpSpec op;  // dimensions (K, S, P, I_C, O_C, M, N, size, alpha, bias ...)
  std::int64_t offset = 0;            // element offset argument
  std::vector<std::uint64_t> dims;  // values of Dims arguments
  LayoutOpt layout;
  Signature sig;
  std::vector<std::uint64_t> args;
  FuncId func_id = 0;
};

/// Everything the kernel emitters need.
struct Program {
  CodegenStyle style;
  HarnessOptions options;
  std::vector<HTensor> tensors;
  std::vector<Kernel> kernels;
  std::uint64_t expf_entry = 0;
};

struct KernelTrace {
  std::vector<TraceEntry> trace;
  std::vector<std::string> listing;
  MemAccessLog access;
};

/// Lowers a model into kernels and tensors; addresses are not assigned yet.
Program lower(const ModelSpec& spec, const CodegenStyle& style, std::uint64_t seed, const HarnessOptions& options);

/// Emits prologue, one outer-loop iteration and epilogue of `k`.
KernelTrace emit_kernel(const Program& prog, const Kernel& k, std::uint64_t& seq, std::uint64_t scratch);

/// Static listings of the non-kernel functions.
std::vector<std::string> expf_listing();
std::vector<std::string> main_listing(const Program& prog);

/// Element index of weight (oc, ic, ky, kx) in a transformed layout.
std::size_t layout_index(const LayoutOpt& l, std::int64_t oc, std::int64_t ic, std::int64_t ky, std::int64_t kx,
                         std::int64_t I_C, std::int64_t K);

}  // namespace nnd::harness
