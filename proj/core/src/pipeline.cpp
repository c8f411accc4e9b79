// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "nndecomp/model.hpp"

namespace nnd {

namespace fs = std::filesystem;

bool DecompileResult::needs_review() const {
  return std::any_of(draft.findings.begin(), draft.findings.end(), [](const Finding& f) { return f.needs_review(); });
}

std::size_t default_workers() {
  if (const char* env = std::getenv("NNDECOMP_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string node_id(std::uint64_t call, OpKind kind) {
  std::string k(kind_name(kind));
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return "n" + std::to_string(call) + "_" + k;
}

bool pass_through(OpKind k) { return k == OpKind::Reshape || k == OpKind::Transpose || k == OpKind::ExpandDims; }

std::int64_t isqrt_exact(std::int64_t v) {
  if (v <= 0) return 0;
  auto r = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(v))));
  return r * r == v ? r : 0;
}

class Assembler {
 public:
  Assembler(const CompGraph& g, const std::vector<RecoveredOp>& ops) : g_(g) {
    for (const auto& r : ops) by_call_[r.call_index] = &r;
  }

  DraftModel run() {
    d_.spec.input_shape = input_shape();
    for (const auto& [ci, r] : by_call_) add(*r);
    return std::move(d_);
  }

 private:
  /// Producer call of input `a` of `r`, if the graph links one.
  std::optional<std::uint64_t> producer(const RecoveredOp& r, const ArgInfo& a) const {
    for (const auto& e : g_.edges)
      if (e.consumer == r.call_index && e.via_address == a.address) return e.producer;
    return std::nullopt;
  }

  bool reads_model_input(const RecoveredOp& r, const ArgInfo& a) const { return !producer(r, a) && !a.in_snapshot; }

  /// Spatial side of the tensor a call reads, looking through shape-preserving consumers.
  std::int64_t spatial_below(std::uint64_t call, int depth = 0) const {
    if (depth > 16) return 0;
    auto it = by_call_.find(call);
    if (it == by_call_.end()) return 0;
    const RecoveredOp& r = *it->second;
    if (!r.error) {
      if (r.kind == OpKind::Conv && r.dims.count("IH")) return static_cast<std::int64_t>(r.dims.at("IH"));
      if ((r.kind == OpKind::MaxPool || r.kind == OpKind::AvgPool) && r.dims.count("IH"))
        return static_cast<std::int64_t>(r.dims.at("IH"));
    }
    if (r.kind == OpKind::InsertTensor) return 0;
    for (const auto& e : g_.outputs_of(call))
      if (auto h = spatial_below(e.consumer, depth + 1)) return h;
    return 0;
  }

  const RecoveredOp* conv_below(std::uint64_t call, int depth = 0) const {
    auto it = by_call_.find(call);
    if (depth > 16 || it == by_call_.end()) return nullptr;
    if (it->second->kind == OpKind::Conv) return it->second;
    if (!pass_through(it->second->kind)) return nullptr;
    for (const auto& e : g_.outputs_of(call))
      if (auto* c = conv_below(e.consumer, depth + 1)) return c;
    return nullptr;
  }

  Shape input_shape() const {
    std::uint64_t bytes = 0;
    std::vector<const RecoveredOp*> readers;
    for (const auto& [ci, r] : by_call_)
      for (const auto& a : r->inputs)
        if (reads_model_input(*r, a) && !(r->kind == OpKind::InsertTensor && a.roles.is_output())) {
          bytes = std::max(bytes, a.region.end() > a.address ? a.region.end() - a.address : 0);
          readers.push_back(r);
        }
    if (readers.empty()) return {};
    const auto total = static_cast<std::int64_t>(bytes / kElemBytes);
    for (const RecoveredOp* r : readers) {
      if (r->error) continue;
      switch (r->kind) {
        case OpKind::Conv: {
          const auto ic = static_cast<std::int64_t>(r->dims.at("I_C")), ih = static_cast<std::int64_t>(r->dims.at("IH"));
          return {1, ic, ih, ih};
        }
        case OpKind::Dense: return {1, static_cast<std::int64_t>(r->dims.at("M"))};
        case OpKind::Embedding: return {1, static_cast<std::int64_t>(r->dims.at("L"))};
        case OpKind::InsertTensor:
          for (const auto& e : g_.outputs_of(r->call_index)) {
            const RecoveredOp* c = by_call_.at(e.consumer);
            if (c->kind != OpKind::Conv || c->error) continue;
            const auto ic = static_cast<std::int64_t>(c->dims.at("I_C"));
            if (auto h = isqrt_exact(total / ic); h && total % ic == 0) return {1, ic, h, h};
          }
          break;
        default: break;
      }
    }
    // A convolution behind a reshape: I_C must split both the per-output
    // multiply count (I_C*K*K) and the input size (I_C*H*H) into squares,
    // and the result must fit the observed output. Ties go to the smallest kernel.
    for (const RecoveredOp* r : readers) {
      const RecoveredOp* c = conv_below(r->call_index);
      // A channel split in front of the reshape: the conv sees only its slice.
      std::int64_t seen = total;
      if (!c && r->kind == OpKind::Split) {
        seen = static_cast<std::int64_t>(r->M_o / kElemBytes);
        for (const auto& e : g_.outputs_of(r->call_index))
          if (!c) c = conv_below(e.consumer);
      }
      if (!c || c->mul_count == 0 || seen <= 0) continue;
      const auto n = static_cast<std::int64_t>(c->mul_count);
      const auto w_elems = static_cast<std::int64_t>(c->M_w / kElemBytes);
      if (w_elems % n) continue;
      const std::int64_t oc = w_elems / n;
      const std::int64_t oh = isqrt_exact(static_cast<std::int64_t>(c->M_o / kElemBytes) / oc);
      for (std::int64_t ic = n; ic >= 1; --ic) {
        if (n % ic || seen % ic || !isqrt_exact(n / ic) || !isqrt_exact(seen / ic)) continue;
        const std::int64_t h = isqrt_exact(seen / ic);
        if (total % (h * h)) continue;
        try {
          repair_conv_dims({1, ic, h, h}, {1, oc, oh, oh}, n);
          return {1, total / (h * h), h, h};
        } catch (const Error&) {
        }
      }
    }
    for (const RecoveredOp* r : readers) {
      const std::int64_t h = spatial_below(r->call_index);
      if (h > 0 && total % (h * h) == 0) return {1, total / (h * h), h, h};
    }
    return {1, total};
  }

  Source source(const RecoveredOp& r, std::size_t slot) {
    const ArgInfo& a = r.inputs.at(slot);
    if (auto p = producer(r, a)) {
      auto it = out_.find(*p);
      if (it != out_.end()) return it->second;
    }
    if (a.in_snapshot) {
      const std::string name = "n" + std::to_string(r.call_index) + ".in" + std::to_string(slot);
      auto it = r.params.find("input" + std::to_string(slot));
      if (it != r.params.end()) d_.spec.params[name] = it->second;
      return Source::param(name);
    }
    return Source::model_input();
  }

  OpEvidence evidence(const RecoveredOp& r) const {
    OpEvidence e;
    e.call_index = r.call_index;
    e.func_id = r.func_id;
    e.anchor = r.kind;
    e.labels = r.labels;
    e.mul_count = r.mul_count;
    e.has_max = r.has_max;
    e.M_i = r.M_i;
    e.M_w = r.M_w;
    e.M_o = r.M_o;
    e.written_bytes = r.written_bytes;
    e.error = r.error;
    e.error_message = r.error_message;
    e.degenerate = r.needs_review;
    return e;
  }

  std::string param(const RecoveredOp& r, const std::string& role) {
    auto it = r.params.find(role);
    if (it == r.params.end()) return {};
    const std::string name = "n" + std::to_string(r.call_index) + "." + role;
    d_.spec.params[name] = it->second;
    return name;
  }

  std::optional<Shape> shape_of(const Source& s) const {
    switch (s.kind) {
      case Source::Kind::ModelInput:
        if (d_.spec.input_shape.empty()) return std::nullopt;
        return d_.spec.input_shape;
      case Source::Kind::Param: {
        auto it = d_.spec.params.find(s.name);
        if (it == d_.spec.params.end()) return std::nullopt;
        return it->second.shape();
      }
      case Source::Kind::Op: {
        auto shapes = partial_shapes(d_.spec);
        auto it = shapes.find(s.name);
        if (it == shapes.end()) return std::nullopt;
        return it->second;
      }
    }
    return std::nullopt;
  }

  void push(const RecoveredOp& r, OpSpec op) {
    d_.evidence[op.id] = evidence(r);
    out_[r.call_index] = Source::op(op.id);
    d_.spec.ops.push_back(std::move(op));
  }

  void add(const RecoveredOp& r) {
    if (pass_through(r.kind)) {
      out_[r.call_index] = source(r, 0);
      return;
    }
    if (r.kind == OpKind::InsertTensor) {
      std::size_t slot = 0;
      for (std::size_t i = 0; i < r.inputs.size(); ++i)
        if (!r.inputs[i].roles.is_output()) slot = i;
      out_[r.call_index] = source(r, slot);
      inserts_.insert(r.call_index);
      return;
    }
    OpSpec op;
    op.id = node_id(r.call_index, r.kind);
    op.kind = r.kind;
    for (std::size_t i = 0; i < r.inputs.size(); ++i) op.inputs.push_back(source(r, i));
    switch (r.kind) {
      case OpKind::Conv: conv(r, op); break;
      case OpKind::Dense:
        op.attrs = r.dims;
        if (auto w = param(r, "weights"); !w.empty()) op.params["weights"] = w;
        if (auto b = param(r, "bias"); !b.empty()) op.params["bias"] = b;
        break;
      case OpKind::BiasAdd:
        if (auto b = param(r, "bias"); !b.empty()) op.params["bias"] = b;
        op.inputs.resize(std::min<std::size_t>(op.inputs.size(), 1));
        break;
      case OpKind::MaxPool:
      case OpKind::AvgPool:
        for (const char* k : {"K", "S"})
          if (r.dims.count(k)) op.attrs[k] = r.dims.at(k);
        break;
      case OpKind::LRN:
        for (const char* k : {"size", "alpha", "beta", "bias"})
          if (r.attrs.count(k)) op.attrs[k] = r.attrs.at(k);
        break;
      case OpKind::Embedding:
        if (auto w = param(r, "weights"); !w.empty()) op.params["weights"] = w;
        break;
      case OpKind::Split: split(r, op); break;
      default: break;
    }
    push(r, std::move(op));
    const bool linear = r.kind == OpKind::Conv || r.kind == OpKind::Dense || r.kind == OpKind::Add ||
                        r.kind == OpKind::BiasAdd || r.kind == OpKind::Multiply;
    if (r.fused_relu && linear) {
      OpSpec relu;
      relu.id = node_id(r.call_index, OpKind::ReLU);
      relu.kind = OpKind::ReLU;
      relu.inputs = {out_.at(r.call_index)};
      OpEvidence e = evidence(r);
      e.is_activation = true;
      d_.evidence[relu.id] = e;
      out_[r.call_index] = Source::op(relu.id);
      d_.spec.ops.push_back(std::move(relu));
    }
  }

  void conv(const RecoveredOp& r, OpSpec& op) {
    op.attrs = {{"S", 1.0}, {"P", 0.0}};
    for (const char* k : {"K", "S", "P", "O_C", "I_C"})
      if (r.dims.count(k)) op.attrs[k] = r.dims.at(k);
    if (auto w = param(r, "weights"); !w.empty()) op.params["weights"] = w;
    if (auto b = param(r, "bias"); !b.empty()) op.params["bias"] = b;
    if (!r.dims.count("IH") || r.inputs.empty()) return;
    // Explicit padding kernels fold into the convolution.
    auto p = producer(r, r.inputs[0]);
    if (!p || !inserts_.count(*p)) return;
    auto prev = shape_of(op.inputs[0]);
    try {
      if (!prev || prev->size() != 4) fail(ErrorCode::NonIntegerDim, "padded input has no spatial shape");
      op.attrs["P"] += static_cast<double>(conv_padding(static_cast<std::int64_t>(r.dims.at("IH")), (*prev)[2]));
    } catch (const Error& e) {
      OpEvidence ev = evidence(r);
      ev.error = e.code();
      ev.error_message = e.what();
      d_.evidence[op.id] = ev;
    }
  }

  void split(const RecoveredOp& r, OpSpec& op) {
    std::int64_t inner = 1;
    if (!op.inputs.empty())
      if (auto s = shape_of(op.inputs[0]); s && s->size() >= 2)
        for (std::size_t i = 2; i < s->size(); ++i) inner *= (*s)[i];
    const double off = r.attrs.count("offset") ? r.attrs.at("offset") : 0.0;
    op.attrs["offset"] = off / static_cast<double>(inner);
    op.attrs["size"] = static_cast<double>(r.M_o / kElemBytes) / static_cast<double>(inner);
  }

  const CompGraph& g_;
  std::map<std::uint64_t, const RecoveredOp*> by_call_;
  std::map<std::uint64_t, Source> out_;
  std::set<std::uint64_t> inserts_;
  DraftModel d_;
};

/// Runs `task(i)` for i in [0, n) on a bounded pool; rethrows the first
/// failure in index order.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

class Stopwatch {
 public:
  explicit Stopwatch(const DecompileOptions& o) : o_(o), t_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    if (o_.on_stage) o_.on_stage(stage, std::chrono::duration<double, std::milli>(now - t_).count());
    t_ = now;
  }

 private:
  const DecompileOptions& o_;
  std::chrono::steady_clock::time_point t_;
};

}  // namespace

DraftModel assemble_draft(const CompGraph& graph, const std::vector<RecoveredOp>& ops) { return Assembler(graph, ops).run(); }

DecompileResult decompile(const TraceBundle& bundle, const Classifier* classifier, const DecompileOptions& options) {
  if ((!options.labels || !options.style) && !classifier)
    fail(ErrorCode::InvalidArgument, "a classifier is required unless labels and style are given");
  DecompileResult res;
  Stopwatch clock(options);

  if (options.labels) {
    res.labels = *options.labels;
  } else {
    for (const auto& f : bundle.functions) res.labels[f.id] = classifier->classify(f);
    clock.lap("classify");
  }
  if (options.style) {
    res.style = *options.style;
  } else {
    res.style = classifier->predict_provenance(bundle);
    clock.lap("provenance");
  }

  const SignatureConfig& sigs = SignatureConfig::builtin();
  const CallTargets calls = call_targets(bundle);
  const std::size_t workers = options.workers ? options.workers : default_workers();
  for (res.passes = 1;; ++res.passes) {
    res.graph = recover_topology(bundle, res.labels, sigs, res.style);
    clock.lap("topology");

    std::vector<const CallsiteRecord*> todo;
    for (const auto& c : bundle.callsites)
      if (res.graph.node(c.call_index)) todo.push_back(&c);
    res.ops.assign(todo.size(), {});
    parallel_for(todo.size(), workers, [&](std::size_t i) {
      OperatorContext ctx;
      ctx.bundle = &bundle;
      ctx.call = todo[i];
      ctx.labels = res.labels.at(todo[i]->func_id);
      ctx.signature = &callsite_signature(*todo[i], ctx.labels, sigs, res.style);
      ctx.taint = options.taint;
      ctx.calls = &calls;
      res.ops[i] = recover_operator(ctx);
    });
    clock.lap("taint+se+recover");

    res.draft = apply_rules(assemble_draft(res.graph, res.ops));
    clock.lap("rules");
    if (res.draft.relabel.empty() || res.passes >= kMaxRulePasses) break;
    bool changed = false;
    for (const auto& [fid, l] : res.draft.relabel) {
      changed |= !(res.labels[fid] == l);
      res.labels[fid] = l;
    }
    if (!changed) break;
  }
  return res;
}

namespace {

std::string hex_list(const std::vector<std::uint64_t>& v, std::size_t limit) {
  std::ostringstream s;
  for (std::size_t i = 0; i < std::min(v.size(), limit); ++i) s << (i ? "," : "") << v[i] / kElemBytes;
  if (v.size() > limit) s << ",...";
  return s.str();
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(9) << v;
  return s.str();
}

const AssemblyFunction* function_of(const TraceBundle& b, FuncId id) { return b.function(id); }

}  // namespace

std::string render_report(const DecompileResult& r, const TraceBundle& bundle) {
  std::ostringstream s;
  s << "# Decompilation report\n\n";
  s << "- provenance: " << style_name(r.style) << "\n";
  s << "- operator calls: " << r.graph.nodes.size() << ", edges: " << r.graph.edges.size() << "\n";
  s << "- model operators: " << r.draft.spec.ops.size() << ", parameters: " << r.draft.spec.params.size() << "\n";
  s << "- input shape: " << shape_str(r.draft.spec.input_shape) << "\n";
  s << "- recovery rounds: " << r.passes << "\n";
  s << "- status: " << (r.needs_review() ? "needs review" : "clean") << "\n\n";

  s << "## Operators\n\n| call | function | labels | dims | layout | notes |\n|---|---|---|---|---|---|\n";
  for (const auto& op : r.ops) {
    const AssemblyFunction* f = function_of(bundle, op.func_id);
    s << "| " << op.call_index << " | " << (f && !f->name.empty() ? f->name : "f" + std::to_string(op.func_id)) << " | " << op.labels.str() << " | ";
    bool first = true;
    for (const auto& [k, v] : op.dims) {
      s << (first ? "" : " ") << k << "=" << fmt(v);
      first = false;
    }
    s << " | " << (op.kind == OpKind::Conv ? op.layout.str() : "") << " | ";
    if (op.error) s << to_string(*op.error);
    s << " |\n";
  }

  s << "\n## Findings\n\n";
  if (r.draft.findings.empty()) s << "None.\n";
  for (const auto& f : r.draft.findings) {
    s << "- Rule " << f.rule_id << " (" << f.subtype << ") at call " << f.call_index << ", op `" << f.op_id << "`: "
      << f.description << (f.fix_applied ? " Fixed." : " Needs review.") << "\n";
    if (!f.before.empty()) s << "  - before: `" << f.before << "`\n  - after: `" << f.after << "`\n";
  }
  return s.str();
}

void export_result(const DecompileResult& r, const TraceBundle& bundle, const fs::path& out) {
  fs::create_directories(out / "constraints");
  write_labels(r.labels, out / "labels.json");
  write_graph(r.graph, out / "graph.json");
  for (const auto& op : r.ops) {
    const AssemblyFunction* f = function_of(bundle, op.func_id);
    std::ofstream c(out / "constraints" / ("call" + std::to_string(op.call_index) + ".txt"));
    if (!c) fail(ErrorCode::IoError, "cannot write constraints for call " + std::to_string(op.call_index));
    c << "# call " << op.call_index << " function " << op.func_id << " " << (f ? f->name : "") << "\n";
    c << "# labels " << op.labels.str() << "\n";
    for (const auto& [k, v] : op.dims) c << "# dim " << k << " = " << fmt(v) << "\n";
    for (const auto& [k, v] : op.attrs) c << "# attr " << k << " = " << fmt(v) << "\n";
    if (op.kind == OpKind::Conv) c << "# layout " << op.layout.str() << "\n";
    if (!op.weight_offsets.empty()) c << "# weight offsets (elements) " << hex_list(op.weight_offsets, 64) << "\n";
    c << "# regions M_i=" << op.M_i << " M_w=" << op.M_w << " M_o=" << op.M_o << "\n";
    for (const auto& w : op.warnings) c << "# warning " << w << "\n";
    if (op.error) c << "# error " << op.error_message << "\n";
    c << op.constraint_text();
  }
  save_spec(r.draft.spec, out);
  write_findings(r.draft.findings, out / "findings.json");
  std::ofstream rep(out / "report.md");
  if (!rep) fail(ErrorCode::IoError, "cannot write report");
  rep << render_report(r, bundle);
}

}  // namespace nnd
