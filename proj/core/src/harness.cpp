// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/harness.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "harness_internal.hpp"
#include "nndecomp/error.hpp"
#include "nndecomp/evaluator.hpp"

namespace nnd {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace harness;

std::string LayoutOpt::str() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Glow5d: return "glow5d(A=" + std::to_string(A) + ")";
    case Kind::Tvm6d: return "tvm6d(A=" + std::to_string(A) + ",B=" + std::to_string(B) + ")";
  }
  return "none";
}

CodegenStyle CodegenStyle::preset(Style s) {
  switch (s) {
    case Style::TvmO0: return {Style::TvmO0, false, LayoutOpt::none(), 1};
    case Style::TvmO3: return {Style::TvmO3, true, LayoutOpt::tvm6d(0, 0), 8};
    case Style::Glow: return {Style::Glow, true, LayoutOpt::glow5d(8), 8};
  }
  return {};
}

void CodegenStyle::validate() const {
  auto bad = [&](const std::string& why) { fail(ErrorCode::InvalidArgument, std::string(style_name(style)) + ": " + why); };
  if (lanes != 1 && lanes != 4 && lanes != 8) bad("lanes must be 1, 4 or 8");
  if (style == Style::TvmO0 && (lanes != 1 || layout.kind != LayoutOpt::Kind::None))
    bad("unoptimized code is scalar and keeps the plain layout");
  if (layout.kind != LayoutOpt::Kind::None && lanes != 8) bad("transformed layouts need 8 lanes");
  if (layout.kind == LayoutOpt::Kind::Glow5d) {
    if (style != Style::Glow) bad("glow5d layout belongs to Glow");
    if (layout.A <= 0 || layout.A % 8 != 0) bad("glow5d block must be a positive multiple of 8");
  }
  if (layout.kind == LayoutOpt::Kind::Tvm6d) {
    if (style != Style::TvmO3) bad("tvm6d layout belongs to optimized TVM");
    const bool automatic = layout.A == 0 && layout.B == 0;
    auto ok = [](int v) { return v == 8 || v == 16 || v == 32; };
    if (!automatic && !(ok(layout.A) && ok(layout.B))) bad("tvm6d blocks must be 8, 16 or 32");
  }
}

const EmittedFunction* GroundTruth::function(FuncId id) const {
  for (const auto& f : functions)
    if (f.func_id == id) return &f;
  return nullptr;
}

std::optional<float> GroundTruth::value_before(std::uint64_t address, std::uint64_t call_index) const {
  auto it = history.find(address);
  if (it == history.end()) return std::nullopt;
  std::optional<float> v;
  for (const auto& [writer, value] : it->second)
    if (writer <= call_index) v = value;
  return v;
}

namespace {

constexpr std::uint64_t kActivationBase = 0x10000000ull;
constexpr std::uint64_t kParamBase = 0x40000000ull;
constexpr std::uint64_t kScratchBase = 0x60000000ull;
constexpr std::uint64_t kScratchStride = 0x10000ull;
constexpr std::uint64_t kGuard = 0x10000ull;
constexpr std::uint64_t kCodeBase = 0x401000ull;
constexpr std::uint64_t kExpfEntry = 0x7f0000001000ull;

std::uint64_t bump(std::uint64_t& next, std::uint64_t bytes) {
  const std::uint64_t a = next;
  next = (a + bytes + 4095) / 4096 * 4096 + kGuard;
  return a;
}

Tensor trace_input(const ModelSpec& spec, std::uint64_t seed) {
  for (const auto& op : spec.ops)
    if (op.kind == OpKind::Embedding && op.inputs[0].kind == Source::Kind::ModelInput) {
      const auto N = spec.param(op, "weights").shape()[0];
      Tensor t(spec.input_shape);
      const auto L = t.numel();
      for (std::int64_t i = 0; i < L; ++i)
        t[static_cast<std::size_t>(i)] = 2 * L <= N ? static_cast<float>((2 * i) % N) : 0.0f;
      return t;
    }
  return random_inputs(spec, 1, seed ^ 0x7472616365ull).front();
}

const HTensor& T(const Program& p, int id) { return p.tensors.at(static_cast<std::size_t>(id)); }

/// Output of kernel `k` on the current tensor values.
Tensor reference(const Program& p, const Kernel& k) {
  const Shape& os = T(p, k.out).shape;
  auto one_op = [&](OpKind kind) {
    ModelSpec m;
    m.input_shape = T(p, k.in).shape;
    OpSpec o = k.op;
    o.id = "k";
    o.kind = kind;
    o.inputs = {Source::model_input()};
    o.params.clear();
    if (k.weights >= 0) {
      m.params["w"] = T(p, k.weights).value;
      o.params["weights"] = "w";
    }
    if (k.bias >= 0) {
      m.params["b"] = T(p, k.bias).value;
      o.params["bias"] = "b";
    }
    if (k.in2 >= 0) {
      m.params["x2"] = T(p, k.in2).value;
      o.inputs.push_back(Source::param("x2"));
    }
    m.ops.push_back(std::move(o));
    return forward(m, T(p, k.in).value);
  };
  auto flat = [&](std::vector<float> v) { return Tensor(os, std::move(v)); };
  Tensor out;
  switch (k.kk) {
    case KKind::Conv: out = one_op(OpKind::Conv); break;
    case KKind::Dense: out = one_op(OpKind::Dense); break;
    case KKind::BiasAdd: out = one_op(OpKind::BiasAdd); break;
    case KKind::Binary:
    case KKind::Unary:
    case KKind::Pool: out = one_op(k.elem); break;
    case KKind::LRN: out = one_op(OpKind::LRN); break;
    case KKind::Softmax: out = one_op(OpKind::Softmax); break;
    case KKind::Embedding: out = one_op(OpKind::Embedding); break;
    case KKind::Copy: out = flat(T(p, k.in).value.values()); break;
    case KKind::Concat: {
      auto v = T(p, k.in).value.values();
      const auto& b = T(p, k.in2).value.values();
      v.insert(v.end(), b.begin(), b.end());
      out = flat(std::move(v));
      break;
    }
    case KKind::Split: {
      const auto& v = T(p, k.in).value.values();
      out = flat(std::vector<float>(v.begin() + k.offset, v.begin() + k.offset + numel(os)));
      break;
    }
    case KKind::Memset: out = Tensor(os); break;
    case KKind::InsertTensor: {
      out = T(p, k.out).value;
      const Shape& s = T(p, k.in2).shape;
      const auto C = s[1], H = s[2], Hp = os[2];
      const auto& src = T(p, k.in2).value;
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y)
          for (std::int64_t x = 0; x < H; ++x)
            out[static_cast<std::size_t>(k.offset + (c * Hp + y) * Hp + x)] =
                src[static_cast<std::size_t>((c * H + y) * H + x)];
      break;
    }
    case KKind::Im2col: {
      const auto K = k.op.iattr("K"), S = k.op.iattr("S"), P = k.op.iattr("P"), IC = k.op.iattr("I_C");
      const auto H = T(p, k.in).shape[2];
      const auto OH = *window_out(H, K, S, P);
      const auto& in = T(p, k.in).value;
      out = Tensor(os);
      for (std::int64_t oy = 0; oy < OH; ++oy)
        for (std::int64_t ox = 0; ox < OH; ++ox)
          for (std::int64_t ic = 0; ic < IC; ++ic)
            for (std::int64_t ky = 0; ky < K; ++ky)
              for (std::int64_t kx = 0; kx < K; ++kx) {
                const auto iy = oy * S - P + ky, ix = ox * S - P + kx;
                const auto j = (ic * K + ky) * K + kx;
                if (iy >= 0 && iy < H && ix >= 0 && ix < H)
                  out[static_cast<std::size_t>((oy * OH + ox) * IC * K * K + j)] =
                      in[static_cast<std::size_t>((ic * H + iy) * H + ix)];
              }
      break;
    }
    case KKind::ConvCols: {
      const auto& cols = T(p, k.in).value;
      const auto& w = T(p, k.weights).value;
      const auto n = cols.shape()[1], P2 = cols.shape()[0], OC = k.op.iattr("O_C");
      out = Tensor(os);
      for (std::int64_t oc = 0; oc < OC; ++oc)
        for (std::int64_t q = 0; q < P2; ++q) {
          float acc = 0.0f;
          for (std::int64_t j = 0; j < n; ++j)
            acc += cols[static_cast<std::size_t>(q * n + j)] * w[static_cast<std::size_t>(oc * n + j)];
          if (k.bias >= 0) acc += T(p, k.bias).value[static_cast<std::size_t>(oc)];
          out[static_cast<std::size_t>(oc * P2 + q)] = acc;
        }
      break;
    }
  }
  if (k.relu)
    for (auto& v : out.data()) v = std::max(v, 0.0f);
  return Tensor(os, out.values());
}

std::uint64_t arg_value(const Program& p, const Kernel& k, const RoleSet& r, std::size_t& dim) {
  auto addr = [&](int t) {
    if (t < 0) fail(ErrorCode::InvalidArgument, "signature role without a tensor");
    return T(p, t).address;
  };
  if (r.has(Role::Out)) return addr(k.out);
  if (r.has(Role::In) || r.has(Role::In1)) return addr(k.in);
  if (r.has(Role::In2)) return addr(k.in2);
  if (r.has(Role::Weights)) return addr(k.weights);
  if (r.has(Role::Biases)) return addr(k.bias);
  if (r.has(Role::Offset)) return static_cast<std::uint64_t>(k.offset);
  return k.dims.at(dim++);
}

void record_history(GroundTruth& gt, const HTensor& t, std::uint64_t writer) {
  const auto& v = t.param ? t.stored : t.value.values();
  for (std::size_t i = 0; i < v.size(); ++i) gt.history[t.address + 4 * i].emplace_back(writer, v[i]);
}

}  // namespace

std::pair<TraceBundle, GroundTruth> emit_bundle(const ModelSpec& spec, const CodegenStyle& style, std::uint64_t seed,
                                                const HarnessOptions& options) {
  style.validate();
  validate(spec);
  Program prog = lower(spec, style, seed, options);
  prog.tensors[0].value = trace_input(spec, seed);

  for (const auto& k : prog.kernels) prog.tensors[static_cast<std::size_t>(k.out)].value = reference(prog, k);

  TraceBundle bundle;
  GroundTruth gt;
  gt.provenance = style.style;
  gt.trace_input = prog.tensors[0].value;
  bundle.provenance_truth = style.style;

  std::uint64_t act_next = kActivationBase, param_next = kParamBase;
  for (auto& t : prog.tensors) {
    if (t.alias_of >= 0) {
      t.address = prog.tensors[static_cast<std::size_t>(t.alias_of)].address;
    } else if (t.param) {
      t.address = bump(param_next, t.stored.size() * 4);
      bundle.snapshot.add_f32(t.address, t.stored);
    } else {
      t.address = bump(act_next, static_cast<std::uint64_t>(numel(t.shape)) * 4);
    }
  }
  for (const auto& t : prog.tensors)
    if (t.param || &t == &prog.tensors[0]) record_history(gt, t, 0);

  const bool uses_expf =
      std::any_of(prog.kernels.begin(), prog.kernels.end(), [](const Kernel& k) { return k.kk == KKind::Softmax; });
  prog.expf_entry = uses_expf ? kExpfEntry : 0;

  FuncId next_id = 0;
  std::optional<FuncId> memset_id;
  std::uint64_t seq = 0;
  for (std::size_t ci = 0; ci < prog.kernels.size(); ++ci) {
    Kernel& k = prog.kernels[ci];
    std::size_t dim = 0;
    k.args.clear();
    for (const auto& r : k.sig) k.args.push_back(arg_value(prog, k, r, dim));
    bool first = true;
    if (k.kk == KKind::Memset) {
      first = !memset_id.has_value();
      if (first) memset_id = next_id++;
      k.func_id = *memset_id;
    } else {
      k.func_id = next_id++;
    }
    KernelTrace kt = emit_kernel(prog, k, seq, kScratchBase + ci * kScratchStride);
    if (first) {
      const std::string name = k.kk == KKind::Memset ? "memset" : "";
      bundle.functions.push_back({k.func_id, name, std::move(kt.listing), kCodeBase + k.func_id * 0x1000ull});
      bundle.traces[k.func_id] = std::move(kt.trace);
      bundle.access_logs[k.func_id] = std::move(kt.access);
      gt.functions.push_back({k.func_id, k.labels, k.sig, k.source_ops, k.layout});
    } else {
      auto& log = bundle.access_logs[k.func_id];
      log.reads.insert(log.reads.end(), kt.access.reads.begin(), kt.access.reads.end());
      log.writes.insert(log.writes.end(), kt.access.writes.begin(), kt.access.writes.end());
      log.normalize();
    }
    bundle.callsites.push_back({ci, k.func_id, k.args});
    record_history(gt, prog.tensors[static_cast<std::size_t>(k.out)], ci + 1);
  }
  const FuncId main_id = next_id++;
  bundle.functions.push_back({main_id, "main", main_listing(prog), kCodeBase + main_id * 0x1000ull});
  gt.functions.push_back({main_id, {}, {}, {}, LayoutOpt::none()});
  if (uses_expf) {
    const FuncId expf_id = next_id++;
    bundle.functions.push_back({expf_id, "expf", expf_listing(), kExpfEntry});
    gt.functions.push_back({expf_id, {}, {}, {}, LayoutOpt::none()});
  }

  // Dataflow between labeled calls: each input buffer's last labeled writer.
  std::set<std::pair<std::uint64_t, std::uint64_t>> edges;
  for (std::size_t ci = 0; ci < prog.kernels.size(); ++ci) {
    const Kernel& k = prog.kernels[ci];
    if (k.labels.empty()) continue;
    for (int t : {k.in, k.in2}) {
      if (t < 0 || T(prog, t).param || (k.kk == KKind::InsertTensor && t == k.out)) continue;
      const auto a = T(prog, t).address;
      for (std::size_t pi = ci; pi-- > 0;) {
        const Kernel& w = prog.kernels[pi];
        if (!w.labels.empty() && T(prog, w.out).address == a) {
          edges.insert({pi, ci});
          break;
        }
      }
    }
  }
  gt.edges.assign(edges.begin(), edges.end());

  validate(bundle);
  return {std::move(bundle), std::move(gt)};
}

namespace {

json labels_json(const std::vector<OpKind>& labels) {
  json a = json::array();
  for (OpKind k : labels) a.push_back(std::string(kind_name(k)));
  return a;
}

std::vector<OpKind> labels_from(const json& j) {
  std::vector<OpKind> out;
  for (const auto& s : j) {
    auto k = parse_kind(s.get<std::string>());
    if (!k) fail(ErrorCode::SchemaViolation, "unknown operator label " + s.get<std::string>());
    out.push_back(*k);
  }
  return out;
}

}  // namespace

void save_ground_truth(const GroundTruth& truth, const fs::path& dir) {
  json j;
  j["provenance"] = style_name(truth.provenance);
  json fns = json::array();
  for (const auto& f : truth.functions) {
    json roles = json::array();
    for (const auto& r : f.arg_roles) roles.push_back(r.str());
    fns.push_back({{"func_id", f.func_id},
                   {"fused_ops", labels_json(f.fused_ops)},
                   {"arg_roles", roles},
                   {"source_ops", f.source_ops},
                   {"layout", f.layout.str()}});
  }
  j["functions"] = fns;
  json edges = json::array();
  for (const auto& [a, b] : truth.edges) edges.push_back({a, b});
  j["edges"] = edges;
  j["trace_input"] = {{"shape", truth.trace_input.shape()}, {"data", truth.trace_input.values()}};
  fs::create_directories(dir);
  std::ofstream out(dir / "ground_truth.json", std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / "ground_truth.json").string());
  out << j.dump(1) << "\n";
}

LabeledCorpus emit_corpus(const std::vector<NamedSpec>& specs, const std::vector<Style>& styles, std::uint64_t seed) {
  LabeledCorpus corpus;
  std::uint64_t n = 0;
  auto add = [&](const NamedSpec& named, Style s, const HarnessOptions& opt, const std::string& origin) {
    auto [bundle, truth] = emit_bundle(named.spec, CodegenStyle::preset(s), seed + n++, opt);
    for (const auto& f : bundle.functions) {
      const EmittedFunction* ef = truth.function(f.id);
      corpus.items.push_back({f, ef ? ef->fused_ops : std::vector<OpKind>{}, s, origin});
    }
  };
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const NamedSpec& named = specs[i];
    const bool has_conv = std::any_of(named.spec.ops.begin(), named.spec.ops.end(),
                                      [](const OpSpec& op) { return op.kind == OpKind::Conv; });
    for (Style s : styles) {
      add(named, s, {}, named.name);
      // Every fourth convolutional model also contributes its im2col lowering.
      if (has_conv && s != Style::Glow && i % 4 == 0) add(named, s, {.reshape_conv = true}, named.name + "+im2col");
    }
  }
  return corpus;
}

void save_corpus(const LabeledCorpus& corpus, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string());
  for (const auto& it : corpus.items) {
    json j = {{"func_id", it.function.id},
              {"name", it.function.name},
              {"entry_address", it.function.entry},
              {"opcode_sequence", it.function.opcodes},
              {"labels", labels_json(it.labels)},
              {"provenance", style_name(it.provenance)},
              {"origin", it.origin}};
    out << j.dump() << "\n";
  }
}

LabeledCorpus load_corpus(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::IoError, "cannot read " + file.string());
  LabeledCorpus corpus;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      LabeledFunction f;
      f.function.id = j.at("func_id").get<FuncId>();
      f.function.name = j.at("name").get<std::string>();
      f.function.entry = j.at("entry_address").get<std::uint64_t>();
      f.function.opcodes = j.at("opcode_sequence").get<std::vector<std::string>>();
      f.labels = labels_from(j.at("labels"));
      f.provenance = parse_style(j.at("provenance").get<std::string>());
      f.origin = j.at("origin").get<std::string>();
      corpus.items.push_back(std::move(f));
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaViolation, file.filename().string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace nnd
