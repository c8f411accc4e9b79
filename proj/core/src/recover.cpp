// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/recover.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nndecomp/model.hpp"

namespace nnd {

namespace {

std::int64_t exact_div(std::uint64_t num, std::uint64_t den, const std::string& what) {
  if (den == 0 || num % den != 0)
    fail(ErrorCode::NonIntegerDim, what + " = " + std::to_string(num) + "/" + std::to_string(den) + " is not an integer");
  return static_cast<std::int64_t>(num / den);
}

std::int64_t exact_sqrt(std::int64_t v, const std::string& what) {
  auto r = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(v))));
  if (v <= 0 || r * r != v) fail(ErrorCode::NonIntegerDim, what + " = sqrt(" + std::to_string(v) + ") is not an integer");
  return r;
}

std::vector<std::uint64_t> sorted_offsets(const std::vector<std::uint64_t>& cells) {
  std::vector<std::uint64_t> s(cells);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  const std::uint64_t base = s.empty() ? 0 : s.front();
  for (auto& v : s) v -= base;
  return s;
}

/// Lengths of the maximal runs of 4-byte steps.
std::vector<std::size_t> runs(const std::vector<std::uint64_t>& sorted) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] - sorted[j - 1] == kElemBytes) ++j;
    out.push_back(j - i);
    i = j;
  }
  return out;
}

std::size_t longest_run(const std::vector<std::uint64_t>& cells) {
  auto r = runs(sorted_offsets(cells));
  return r.empty() ? 0 : *std::max_element(r.begin(), r.end());
}

std::uint64_t min_cell(const RoleTaggedConstraint& c) {
  if (c.input_cells.empty()) fail(ErrorCode::NonIntegerDim, "constraint has no input cells");
  return *std::min_element(c.input_cells.begin(), c.input_cells.end());
}

}  // namespace

KernelAndChannels conv_kernel_and_ic(const RoleTaggedConstraint& c) {
  const auto rel = sorted_offsets(c.input_cells);
  if (rel.empty()) fail(ErrorCode::NonIntegerDim, "constraint has no input cells");
  const auto r = runs(rel);
  KernelAndChannels out;
  out.K = static_cast<std::int64_t>(*std::max_element(r.begin(), r.end()));
  out.I_C = exact_div(rel.size(), static_cast<std::uint64_t>(out.K * out.K), "I_C");
  if (out.K > 1 && r.front() == static_cast<std::size_t>(out.K) && rel.size() > r.front())
    out.IH = exact_div(rel[r.front()], kElemBytes, "IH");
  return out;
}

std::int64_t conv_padding(std::int64_t this_IH, std::int64_t prev_OH) {
  const std::int64_t d = this_IH - prev_OH;
  if (d < 0 || d % 2 != 0)
    fail(ErrorCode::NonIntegerDim, "padding (" + std::to_string(this_IH) + " - " + std::to_string(prev_OH) + ")/2");
  return d / 2;
}

ConvDims conv_oc_and_stride(ConvDims d, std::uint64_t M_w, std::uint64_t M_i, std::uint64_t M_o) {
  if (d.K <= 0 || d.I_C <= 0) fail(ErrorCode::NonIntegerDim, "kernel size and input channels must be known");
  const auto per = static_cast<std::uint64_t>(d.I_C * d.K * d.K);
  d.O_C = exact_div(M_w, kElemBytes * per, "O_C");
  d.IH = exact_sqrt(exact_div(M_i, kElemBytes * static_cast<std::uint64_t>(d.I_C), "IH^2"), "IH");
  d.OH = exact_sqrt(exact_div(M_o, kElemBytes * static_cast<std::uint64_t>(d.O_C), "OH^2"), "OH");
  if (d.OH == 1) fail(ErrorCode::DegenerateOutput, "single output column leaves the stride undetermined");
  const std::int64_t span = d.IH + 2 * d.P - d.K;
  if (span <= 0) fail(ErrorCode::NonIntegerDim, "kernel does not fit the padded input");
  d.S = span / (d.OH - 1);
  if (!d.consistent())
    fail(ErrorCode::NonIntegerDim, "no integer stride maps IH=" + std::to_string(d.IH) + " to OH=" + std::to_string(d.OH));
  return d;
}

FcDims fc_dims(const RoleTaggedConstraint& c, std::uint64_t M_o) {
  FcDims d;
  d.M = static_cast<std::int64_t>(count_op(c.expr, SymOp::Mul));
  if (d.M == 0) fail(ErrorCode::ZeroMuls, "dense constraint contains no multiplication");
  d.N = exact_div(M_o, kElemBytes, "N");
  return d;
}

PoolDims pool_dims(const RoleTaggedConstraint& c1, const RoleTaggedConstraint& c2) {
  const std::uint64_t a = min_cell(c1), b = min_cell(c2);
  if (a == b) fail(ErrorCode::IdenticalConstraints, "adjacent pooling outputs start at the same input cell");
  PoolDims d;
  d.K = static_cast<std::int64_t>(longest_run(c1.input_cells));
  d.S = exact_div(a > b ? a - b : b - a, kElemBytes, "S");
  return d;
}

std::int64_t lrn_neighbors(const RoleTaggedConstraint& c) { return static_cast<std::int64_t>(c.input_cells.size()); }

EmbeddingDims embedding_dims(const MemAccessLog& access, const MemRegion& table) {
  std::vector<MemRef> inside;
  for (const auto& r : access.reads)
    if (table.contains(r.address)) inside.push_back(r);
  std::uint64_t longest = 0;
  for (const auto& r : byte_ranges(inside)) longest = std::max(longest, r.size());
  if (longest < kElemBytes) fail(ErrorCode::NoContiguousRun, "no contiguous read inside the table at " + hex(table.base));
  EmbeddingDims d;
  d.D = exact_div(longest, kElemBytes, "D");
  d.N = exact_div(table.size, longest, "N");
  return d;
}

MemRegion bias_region(const MemAccessLog& access, const CallsiteRecord& call, const Signature& sig) {
  if (find_role(sig, Role::Biases) < 0) fail(ErrorCode::MissingRole, "operator has no biases argument");
  return scope_regions(access, call, sig).region(sig, Role::Biases);
}

double RecoveredOp::dim(const std::string& key) const {
  auto it = dims.find(key);
  if (it == dims.end()) fail(ErrorCode::SchemaViolation, "operator at call " + std::to_string(call_index) + " has no " + key);
  return it->second;
}

std::string RecoveredOp::constraint_text() const {
  std::vector<std::pair<std::string, MemRegion>> named;
  for (const auto& a : inputs) named.emplace_back(a.roles.str(), a.region);
  auto namer = [&](std::uint64_t addr, std::uint32_t) -> std::string {
    for (const auto& [name, r] : named)
      if (r.contains(addr)) return name + "[" + std::to_string((addr - r.base) / kElemBytes) + "]";
    return "mem[" + hex(addr) + "]";
  };
  std::ostringstream s;
  for (const auto& c : constraints) {
    s << "out[" << (c.output_cell.address - output.region.base) / kElemBytes << "] = " << to_string(c.expr, namer) << '\n';
  }
  return s.str();
}

namespace {

class Recovery {
 public:
  explicit Recovery(const OperatorContext& ctx)
      : ctx_(ctx), b_(*ctx.bundle), call_(*ctx.call), sig_(*ctx.signature), access_(b_.access_logs.at(call_.func_id)) {}

  RecoveredOp run() {
    op_.call_index = call_.call_index;
    op_.func_id = call_.func_id;
    op_.labels = ctx_.labels;
    const auto kinds = ctx_.labels.kinds();
    if (kinds.empty()) fail(ErrorCode::MissingSignature, "utility function has no operator to recover");
    op_.kind = kinds.front();
    op_.fused_relu = op_.kind != OpKind::ReLU && ctx_.labels.has(OpKind::ReLU);

    regions_ = scope_regions(access_, call_, sig_);
    op_.warnings = regions_.warnings;
    bind_args();
    // Distinct bytes written outside the callee's stack frame. Frame slots
    // are the targets of pushes and rsp/rbp-based stores in the trace.
    std::set<std::uint64_t> frame, written;
    for (const auto& e : b_.traces.at(call_.func_id)) {
      const bool stack = e.opcode == "push" || e.opcode == "call" ||
                         std::any_of(e.operands.begin(), e.operands.end(), [](const Operand& o) {
                           return o.kind == Operand::Kind::Memory && (o.base == "rsp" || o.base == "rbp");
                         });
      if (stack)
        for (const auto& w : e.writes) frame.insert(w.address);
    }
    for (const auto& w : access_.writes)
      if (!frame.count(w.address))
        for (std::uint64_t a = w.address; a < w.address + w.width; ++a) written.insert(a);
    op_.written_bytes = written.size();
    try {
      analyse();
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
      op_.error = e.code();
      op_.error_message = e.what();
    }
    return std::move(op_);
  }

 private:
  static bool recoverable(ErrorCode c) {
    switch (c) {
      case ErrorCode::NonIntegerDim:
      case ErrorCode::DegenerateOutput:
      case ErrorCode::ZeroMuls:
      case ErrorCode::IdenticalConstraints:
      case ErrorCode::NoContiguousRun:
      case ErrorCode::MissingRole:
      case ErrorCode::LayoutUnrecognized:
      case ErrorCode::RegionOutOfSnapshot:
      case ErrorCode::SizeMismatch: return true;
      default: return false;
    }
  }

  void bind_args() {
    for (std::size_t i = 0; i < sig_.size(); ++i) {
      ArgInfo a;
      a.index = static_cast<int>(i);
      a.roles = sig_[i];
      a.address = call_.args[i];
      a.region = regions_.by_arg[i];
      a.in_snapshot = b_.snapshot.region_at(a.address) != nullptr;
      if (a.roles.is_output() && op_.output.index < 0) op_.output = a;
      args_.push_back(a);
    }
    for (Role r : {Role::In, Role::In1, Role::In2})
      for (const auto& a : args_)
        if (a.roles.has(r)) op_.inputs.push_back(a);
    if (op_.output.index < 0) fail(ErrorCode::MissingRole, "signature has no output argument");
    const ArgInfo* w = arg(Role::Weights);
    op_.M_w = w ? w->region.size : 0;
    op_.M_i = op_.inputs.empty() ? 0 : op_.inputs.front().region.size;
    op_.M_o = op_.output.region.size;
  }

  const ArgInfo* arg(Role r) const {
    for (const auto& a : args_)
      if (a.roles.has(r)) return &a;
    return nullptr;
  }

  /// Output cells the trace writes, in address order.
  std::vector<std::uint64_t> written_cells() const {
    std::set<std::uint64_t> cells;
    const MemRegion& out = op_.output.region;
    for (const auto& e : b_.traces.at(call_.func_id))
      for (const auto& w : e.writes)
        for (std::uint64_t a = w.address; a + kElemBytes <= w.address + w.width; a += kElemBytes)
          if (out.contains(a) && (a - out.base) % kElemBytes == 0) cells.insert(a);
    return {cells.begin(), cells.end()};
  }

  std::vector<RoleTaggedConstraint> constraints_for(std::vector<std::uint64_t> sinks_at) {
    if (sinks_at.empty()) return {};
    const auto& trace = b_.traces.at(call_.func_id);
    std::vector<MemRef> sinks;
    for (auto a : sinks_at) sinks.push_back({a, static_cast<std::uint32_t>(kElemBytes)});
    std::vector<SymExpr> exprs;
    if (taint_applies(ctx_.taint, op_.kind)) {
      const TaintedSubtrace sub = taint_backward(trace, sinks, ctx_.calls);
      exprs = sym_execute(sub.entries, sinks, ctx_.calls);
    } else {
      exprs = sym_execute(trace, sinks, ctx_.calls);
    }
    std::vector<RoleTaggedConstraint> out;
    for (std::size_t i = 0; i < sinks.size(); ++i) out.push_back(tag_roles(simplify(exprs[i]), sinks[i], sig_, regions_));
    return out;
  }

  void first_constraints(std::size_t n) {
    auto cells = written_cells();
    cells.resize(std::min(cells.size(), n));
    op_.constraints = constraints_for(cells);
  }

  void note_evidence(const RoleTaggedConstraint& c) {
    op_.mul_count = count_op(c.expr, SymOp::Mul);
    op_.has_max = contains_op(c.expr, SymOp::Max);
  }

  void extract_param_inputs() {
    for (std::size_t i = 0; i < op_.inputs.size(); ++i) {
      const ArgInfo& a = op_.inputs[i];
      if (!a.in_snapshot || a.region.size == 0) continue;
      op_.params["input" + std::to_string(i)] =
          extract_params(b_.snapshot, a.region, LayoutDesc::plain(), {static_cast<std::int64_t>(a.region.size / kElemBytes)});
    }
  }

  void extract_bias(std::int64_t expected) {
    const ArgInfo* b = arg(Role::Biases);
    if (!b) return;
    op_.fused_bias = true;
    const MemRegion r = bias_region(access_, call_, sig_);
    const auto n = exact_div(r.size, kElemBytes, "bias length");
    if (expected > 0 && n != expected)
      fail(ErrorCode::SizeMismatch, "bias holds " + std::to_string(n) + " values, expected " + std::to_string(expected));
    op_.params["bias"] = extract_params(b_.snapshot, r, LayoutDesc::plain(), {n});
  }

  void analyse() {
    switch (op_.kind) {
      case OpKind::Conv: return conv();
      case OpKind::Dense: return dense();
      case OpKind::MaxPool:
      case OpKind::AvgPool: return pool();
      case OpKind::LRN: return lrn();
      case OpKind::Softmax:
        first_constraints(1);
        if (!op_.constraints.empty()) op_.attrs["N"] = static_cast<double>(op_.constraints[0].input_cells.size());
        return;
      case OpKind::Embedding: return embedding();
      case OpKind::BiasAdd:
        first_constraints(1);
        if (!op_.constraints.empty()) note_evidence(op_.constraints[0]);
        extract_param_inputs();
        return extract_bias(0);
      case OpKind::Split:
      case OpKind::InsertTensor: {
        const int off = find_role(sig_, Role::Offset);
        if (off >= 0) op_.attrs["offset"] = static_cast<double>(call_.args[static_cast<std::size_t>(off)]);
        first_constraints(1);
        return;
      }
      default:
        first_constraints(1);
        if (!op_.constraints.empty()) note_evidence(op_.constraints[0]);
        extract_param_inputs();
        return;
    }
  }

  void conv() {
    const auto cells = written_cells();
    const std::size_t cap = 512;
    op_.constraints = constraints_for({cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(std::min(cells.size(), cap))});
    if (op_.constraints.empty()) fail(ErrorCode::NonIntegerDim, "convolution trace writes no output");

    // The widest window is an interior one.
    std::size_t widest = 0;
    for (std::size_t i = 1; i < op_.constraints.size(); ++i)
      if (op_.constraints[i].input_cells.size() > op_.constraints[widest].input_cells.size()) widest = i;
    const RoleTaggedConstraint& full = op_.constraints[widest];
    note_evidence(full);
    const std::size_t n = full.input_cells.size();
    const auto K_run = static_cast<double>(longest_run(full.input_cells));
    op_.dims = {{"K", K_run}, {"I_C", static_cast<double>(n) / (K_run * K_run)},
                {"O_C", static_cast<double>(op_.M_w) / (kElemBytes * static_cast<double>(n))}};
    const ArgInfo* w = arg(Role::Weights);
    if (!w) fail(ErrorCode::MissingRole, "convolution has no weights argument");
    for (auto c : full.weight_cells) op_.weight_offsets.push_back(c - w->address);
    // Row-major weights stay available flat in case the dimensions need repair.
    bool contiguous = true;
    for (std::size_t i = 0; i < op_.weight_offsets.size(); ++i) contiguous &= op_.weight_offsets[i] == i * kElemBytes;
    if (contiguous && op_.M_w > 0)
      op_.params["weights"] = extract_params(b_.snapshot, w->region, LayoutDesc::plain(),
                                             {static_cast<std::int64_t>(op_.M_w / kElemBytes)});
    extract_bias(0);

    const KernelAndChannels kc = conv_kernel_and_ic(full);
    ConvDims d;
    d.K = kc.K;
    d.I_C = kc.I_C;
    d.O_C = exact_div(op_.M_w, kElemBytes * static_cast<std::uint64_t>(d.I_C * d.K * d.K), "O_C");
    d.IH = exact_sqrt(exact_div(op_.M_i, kElemBytes * static_cast<std::uint64_t>(d.I_C), "IH^2"), "IH");
    d.OH = exact_sqrt(exact_div(op_.M_o, kElemBytes * static_cast<std::uint64_t>(d.O_C), "OH^2"), "OH");
    if (kc.IH != 0 && kc.IH != d.IH)
      op_.warnings.push_back("window row gap suggests IH=" + std::to_string(kc.IH) + ", input region gives " +
                             std::to_string(d.IH));

    // Interior windows of output channel 0 fix stride and implicit padding.
    const std::uint64_t out0 = op_.output.region.base, in0 = op_.inputs.front().region.base;
    const auto plane = static_cast<std::uint64_t>(d.OH * d.OH);
    std::map<std::pair<std::int64_t, std::int64_t>, std::pair<std::int64_t, std::int64_t>> interior;  // (oy,ox) -> (iy,ix)
    const RoleTaggedConstraint* chosen = nullptr;
    for (const auto& c : op_.constraints) {
      const std::uint64_t j = (c.output_cell.address - out0) / kElemBytes;
      if (j >= plane || c.input_cells.size() != n) continue;
      const std::uint64_t m = (min_cell(c) - in0) / kElemBytes;
      interior[{static_cast<std::int64_t>(j / static_cast<std::uint64_t>(d.OH)), static_cast<std::int64_t>(j % static_cast<std::uint64_t>(d.OH))}] =
          {static_cast<std::int64_t>(m / static_cast<std::uint64_t>(d.IH)), static_cast<std::int64_t>(m % static_cast<std::uint64_t>(d.IH))};
      if (!chosen) chosen = &c;
    }
    if (!chosen) fail(ErrorCode::NonIntegerDim, "no full window in output channel 0");
    std::optional<std::int64_t> stride;
    for (const auto& [pos, in] : interior) {
      auto next = interior.find({pos.first, pos.second + 1});
      if (next != interior.end()) {
        stride = next->second.second - in.second;
        break;
      }
    }
    const auto& [opos, ipos] = *interior.begin();
    if (stride) {
      d.S = *stride;
      d.P = opos.second * d.S - ipos.second;
      if (d.S <= 0 || opos.first * d.S - ipos.first != d.P)
        fail(ErrorCode::NonIntegerDim, "window positions do not follow a single stride and padding");
    } else if (interior.size() == static_cast<std::size_t>(op_.constraints.size())) {
      d.P = 0;
      try {
        d = conv_oc_and_stride(d, op_.M_w, op_.M_i, op_.M_o);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateOutput) throw;
        d.S = 1;
        op_.needs_review = true;
        op_.warnings.push_back("DegenerateOutput: one output column, stride assumed 1");
      }
    } else {
      fail(ErrorCode::NonIntegerDim, "padded windows without two adjacent interior outputs");
    }
    if (!d.consistent())
      fail(ErrorCode::NonIntegerDim, "recovered K=" + std::to_string(d.K) + " S=" + std::to_string(d.S) + " P=" +
                                         std::to_string(d.P) + " do not map IH=" + std::to_string(d.IH) + " to OH=" +
                                         std::to_string(d.OH));
    op_.dims = {{"K", double(d.K)},   {"I_C", double(d.I_C)}, {"O_C", double(d.O_C)}, {"S", double(d.S)},
                {"P", double(d.P)},   {"IH", double(d.IH)},   {"OH", double(d.OH)}};

    // Weight offsets of the chosen window; the next channel's, when traced, cross-check the layout.
    op_.weight_offsets.clear();
    for (auto c : chosen->weight_cells) op_.weight_offsets.push_back(c - w->address);
    std::vector<std::uint64_t> next;
    for (const auto& c : op_.constraints)
      if (c.output_cell.address == chosen->output_cell.address + plane * kElemBytes)
        for (auto cell : c.weight_cells) next.push_back(cell - w->address);
    op_.layout = detect_layout(op_.weight_offsets, d, next);
    op_.params["weights"] = extract_params(b_.snapshot, w->region, op_.layout, d.weight_shape());
    extract_bias(d.O_C);
  }

  void dense() {
    first_constraints(1);
    if (op_.constraints.empty()) fail(ErrorCode::ZeroMuls, "dense trace writes no output");
    const auto& c = op_.constraints[0];
    note_evidence(c);
    const FcDims d = fc_dims(c, op_.M_o);
    op_.dims = {{"M", double(d.M)}, {"N", double(d.N)}};
    const ArgInfo* w = arg(Role::Weights);
    if (!w) fail(ErrorCode::MissingRole, "dense operator has no weights argument");
    for (auto cell : c.weight_cells) op_.weight_offsets.push_back(cell - w->address);
    // Vectorized reductions visit the row out of order.
    std::sort(op_.weight_offsets.begin(), op_.weight_offsets.end());
    for (std::size_t i = 0; i < op_.weight_offsets.size(); ++i)
      if (op_.weight_offsets[i] != i * kElemBytes)
        fail(ErrorCode::LayoutUnrecognized, "dense weights are not read row by row");
    op_.params["weights"] = extract_params(b_.snapshot, w->region, LayoutDesc::plain(), {d.N, d.M});
    extract_bias(d.N);
  }

  void pool() {
    first_constraints(2);
    if (op_.constraints.empty()) fail(ErrorCode::IdenticalConstraints, "pooling trace writes no output");
    note_evidence(op_.constraints[0]);
    PoolDims d;
    if (op_.constraints.size() >= 2) {
      d = pool_dims(op_.constraints[0], op_.constraints[1]);
    } else {
      d.K = static_cast<std::int64_t>(longest_run(op_.constraints[0].input_cells));
      d.S = d.K;
      op_.warnings.push_back("single pooling output, stride assumed equal to the window");
    }
    if (d.K * d.K != static_cast<std::int64_t>(op_.constraints[0].input_cells.size()))
      fail(ErrorCode::NonIntegerDim, "pooling window of " + std::to_string(op_.constraints[0].input_cells.size()) +
                                         " cells is not K x K with K=" + std::to_string(d.K));
    op_.dims = {{"K", double(d.K)}, {"S", double(d.S)}};
  }

  void lrn() {
    op_.constraints = constraints_for(written_cells());
    if (op_.constraints.empty()) fail(ErrorCode::NonIntegerDim, "LRN trace writes no output");
    std::int64_t n = 0;
    for (const auto& c : op_.constraints) n = std::max(n, lrn_neighbors(c));
    op_.attrs["size"] = static_cast<double>(n);
    const auto k = constants(op_.constraints[0].expr);
    if (k.size() >= 2) {
      op_.attrs["alpha"] = k[0] * static_cast<double>(n);
      op_.attrs["bias"] = k[1];
    }
    if (count_op(op_.constraints[0].expr, SymOp::Sqrt) >= 2) op_.attrs["beta"] = 0.75;
  }

  void embedding() {
    first_constraints(1);
    const ArgInfo* w = arg(Role::Weights);
    if (!w) fail(ErrorCode::MissingRole, "embedding has no table argument");
    const SnapshotRegion* s = b_.snapshot.region_at(w->address);
    if (!s) fail(ErrorCode::RegionOutOfSnapshot, "embedding table " + hex(w->address) + " is not in the snapshot");
    const MemRegion table{w->address, s->end() - w->address};
    const EmbeddingDims d = embedding_dims(access_, table);
    op_.dims = {{"D", double(d.D)}, {"N", double(d.N)}, {"L", double(op_.M_i / kElemBytes)}};
    op_.attrs["D"] = static_cast<double>(d.D);
    op_.attrs["N"] = static_cast<double>(d.N);
    op_.params["weights"] = extract_params(b_.snapshot, table, LayoutDesc::plain(), {d.N, d.D});
  }

  const OperatorContext& ctx_;
  const TraceBundle& b_;
  const CallsiteRecord& call_;
  const Signature& sig_;
  const MemAccessLog& access_;
  ScopedRegions regions_;
  std::vector<ArgInfo> args_;
  RecoveredOp op_;
};

}  // namespace

RecoveredOp recover_operator(const OperatorContext& ctx) {
  if (!ctx.bundle || !ctx.call || !ctx.signature) fail(ErrorCode::InvalidArgument, "incomplete operator context");
  try {
    return Recovery(ctx).run();
  } catch (const Error& e) {
    fail(e.code(), "function " + std::to_string(ctx.call->func_id) + " (call " + std::to_string(ctx.call->call_index) +
                       "): " + e.detail());
  }
}

}  // namespace nnd
