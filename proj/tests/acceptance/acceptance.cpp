// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion.
//
// usage: nndecomp_acceptance <path-to-nndecomp-cli>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support.hpp"
#include "nndecomp/evaluator.hpp"
#include "nndecomp/symexec.hpp"
#include "nndecomp/taint.hpp"

namespace fs = std::filesystem;
using namespace nnd;
using namespace nnd::testing;

namespace {

constexpr double kRoundTripTol = 1e-4;
constexpr double kTaintTol = 1e-6;
constexpr double kTaintMaxFraction = 0.5;
constexpr double kExactMatchMin = 0.95;
constexpr std::size_t kCorpusMinFunctions = 500;
constexpr std::uint64_t kCorpusSeed = 1;
constexpr std::uint64_t kModelSeed = 7;
constexpr std::uint64_t kBundleSeed = 11;

struct Outcome {
  bool pass = true;
  std::ostringstream notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes << "[fail] " << what << "; ";
    }
  }
};

const Classifier& shared_classifier() {
  static const Classifier c = [] {
    const auto corpus = emit_corpus(models::corpus_suite(60, kCorpusSeed), {std::begin(kAllStyles), std::end(kAllStyles)},
                                    kCorpusSeed);
    return train_classifier(corpus);
  }();
  return c;
}

const OpSpec* nth_conv(const ModelSpec& spec, std::size_t n) {
  for (const auto& op : spec.ops)
    if (op.kind == OpKind::Conv && n-- == 0) return &op;
  return nullptr;
}

std::size_t conv_count(const ModelSpec& spec) {
  return static_cast<std::size_t>(
      std::count_if(spec.ops.begin(), spec.ops.end(), [](const OpSpec& o) { return o.kind == OpKind::Conv; }));
}

// 1. decompile + verify round trip over the acceptance models and all styles.
Outcome criterion1() {
  Outcome o;
  std::size_t passed = 0, total = 0;
  for (const auto& [name, spec] : models::acceptance_suite(kModelSeed)) {
    for (Style s : kAllStyles) {
      ++total;
      const std::string tag = name + "/" + style_name(s);
      try {
        auto [bundle, truth] = emit_bundle(spec, CodegenStyle::preset(s), kBundleSeed);
        DecompileOptions opt;
        opt.workers = 2;
        const DecompileResult r = decompile(bundle, &shared_classifier(), opt);
        TempDir dir("c1");
        export_result(r, bundle, dir.path());
        const ModelSpec recovered = load_spec(dir.path());
        const auto rep = compare(spec, recovered, random_inputs(spec, 20, kModelSeed), kRoundTripTol);
        o.check(r.exit_code() == 0, tag + " exit " + std::to_string(r.exit_code()));
        o.check(rep.pass, tag + " " + rep.summary());
        passed += rep.pass && r.exit_code() == 0;
      } catch (const std::exception& e) {
        o.check(false, tag + " threw " + e.what());
      }
    }
  }
  o.notes << passed << "/" << total << " model-style pairs round-trip at tol " << kRoundTripTol;
  return o;
}

// 2. Golden values for a 2x2 kernel over a 3x3 input.
Outcome criterion2() {
  Outcome o;
  for (Style s : kAllStyles) {
    const std::string tag = style_name(s);
    auto [bundle, truth] = emit_bundle(models::tiny_conv(), CodegenStyle::preset(s), kBundleSeed);
    const DecompileResult r = decompile_oracle(bundle, truth);
    const RecoveredOp* conv = nullptr;
    for (const auto& op : r.ops)
      if (op.kind == OpKind::Conv) conv = &op;
    if (!conv) {
      o.check(false, tag + " no conv recovered");
      continue;
    }
    const std::map<std::string, double> want = {{"K", 2}, {"I_C", 1}, {"IH", 3}, {"O_C", 1}, {"S", 1}};
    for (const auto& [k, v] : want) o.check(conv->dims.count(k) && conv->dims.at(k) == v, tag + " " + k);
    // out[0] of the single 2x2 window
    const RoleTaggedConstraint* c0 = nullptr;
    for (const auto& c : conv->constraints)
      if (c.output_cell.address == conv->output.address) c0 = &c;
    if (!c0) {
      o.check(false, tag + " no constraint for out[0]");
      continue;
    }
    std::set<std::uint64_t> rel;
    for (auto a : c0->input_cells) rel.insert(a - conv->inputs.at(0).address);
    o.check(rel == std::set<std::uint64_t>{0, 4, 12, 16}, tag + " input offsets");
    o.check(count_op(c0->expr, SymOp::Mul) == 4, tag + " multiply terms");
    const std::string text = conv->constraint_text();
    const std::string first = text.substr(0, text.find('\n'));
    o.check(std::count(first.begin(), first.end(), '*') == 4, tag + " printed multiply terms: " + first);
  }
  o.check(conv_padding(3, 1) == 1, "padding from prev OH=1");
  o.notes << "K=2 I_C=1 IH=3 O_C=1 S=1, P(prev OH=1)=" << conv_padding(3, 1) << ", offsets {0,4,12,16}";
  return o;
}

// Stored offset (elements) of weight (oc=0, ic, ky, kx) in [O_C/B, I_C/A, K, K, A, B].
std::uint64_t tvm6d_offset(std::int64_t ic, std::int64_t ky, std::int64_t kx, std::int64_t K, std::int64_t A,
                           std::int64_t B) {
  const std::int64_t icb = ic / A, ici = ic % A;
  return static_cast<std::uint64_t>((((icb * K + ky) * K + kx) * A + ici) * B);
}

// 3. Layout recovery.
Outcome criterion3() {
  Outcome o;
  const std::int64_t OC = 256, IC = 128, K = 3, A = 32, B = 32;
  // Kernel walk: ic block, ky, ic within block, kx.
  std::vector<std::uint64_t> offsets;
  for (std::int64_t icb = 0; icb < IC / A; ++icb)
    for (std::int64_t ky = 0; ky < K; ++ky)
      for (std::int64_t ici = 0; ici < A; ++ici)
        for (std::int64_t kx = 0; kx < K; ++kx) offsets.push_back(tvm6d_offset(icb * A + ici, ky, kx, K, A, B));
  const std::vector<std::uint64_t> listed = {0, 1024, 2048, 32, 1056, 2080, 64, 1088, 2112};
  o.check(std::equal(listed.begin(), listed.end(), offsets.begin()), "offset oracle prefix");
  std::vector<std::uint64_t> bytes;
  for (auto e : offsets) bytes.push_back(e * kElemBytes);
  ConvDims d;
  d.K = K, d.I_C = IC, d.O_C = OC, d.S = 1, d.P = 1, d.IH = 8, d.OH = 8;
  LayoutDesc got;
  try {
    got = detect_layout(bytes, d);
  } catch (const Error& e) {
    o.check(false, e.what());
  }
  o.check(got == LayoutDesc::tvm6d(A, B), "detected " + got.str());
  o.check(got.stored_shape(OC, IC, K) == Shape{8, 4, 3, 3, 32, 32}, "stored shape " + shape_str(got.stored_shape(OC, IC, K)));

  // Inversion against an independently packed tensor.
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> canon(static_cast<std::size_t>(OC * IC * K * K)), packed(canon.size());
  for (auto& v : canon) v = u(rng);
  for (std::int64_t oc = 0; oc < OC; ++oc)
    for (std::int64_t ic = 0; ic < IC; ++ic)
      for (std::int64_t ky = 0; ky < K; ++ky)
        for (std::int64_t kx = 0; kx < K; ++kx) {
          const auto stored = ((((oc / B) * (IC / A) + ic / A) * K + ky) * K + kx) * A * B + (ic % A) * B + oc % B;
          packed[static_cast<std::size_t>(stored)] = canon[static_cast<std::size_t>(((oc * IC + ic) * K + ky) * K + kx)];
        }
  MemorySnapshot snap;
  snap.add_f32(0x40000000, packed);
  const Tensor w = extract_params(snap, {0x40000000, packed.size() * 4}, got, {OC, IC, K, K});
  o.check(w.bit_equal(Tensor({OC, IC, K, K}, canon)), "tvm6d inversion bit-exact");

  // Glow5d(A=8) from generated ConvDKKC8 kernels.
  for (bool bias : {false, true}) {
    const ModelSpec spec = models::single_conv(8, 16, 8, 3, 1, 1, bias, kModelSeed);
    CodegenStyle cs = CodegenStyle::preset(Style::Glow);
    cs.layout = LayoutOpt::glow5d(8);
    auto [bundle, truth] = emit_bundle(spec, cs, kBundleSeed);
    const DecompileResult r = decompile_oracle(bundle, truth);
    const RecoveredOp* conv = nullptr;
    for (const auto& op : r.ops)
      if (op.kind == OpKind::Conv) conv = &op;
    o.check(conv && conv->layout == LayoutDesc::glow5d(8), "glow layout " + (conv ? conv->layout.str() : "none"));
    const OpSpec* src = nth_conv(spec, 0);
    const OpSpec* rec = nth_conv(r.draft.spec, 0);
    o.check(rec && rec->params.count("weights") &&
                r.draft.spec.params.at(rec->params.at("weights")).bit_equal(spec.params.at(src->params.at("weights"))),
            "glow5d weights bit-exact");
  }
  o.notes << "tvm6d(A=32,B=32) -> [8,4,3,3,32,32]; glow5d(A=8) weights bit-exact";
  return o;
}

// 4. Rule 1 repair.
Outcome criterion4() {
  Outcome o;
  DraftModel d;
  d.spec.input_shape = {1, 64, 56, 56};
  OpSpec conv;
  conv.id = "n0_conv";
  conv.kind = OpKind::Conv;
  conv.inputs = {Source::model_input()};
  // Contiguous im2col column: K from the run, I_C = n / K^2 fractional.
  conv.attrs = {{"K", 24}, {"I_C", 576.0 / 576.0}, {"O_C", 128}, {"S", 1}, {"P", 0}};
  d.spec.params["n0.weights"] = Tensor({128 * 576});
  conv.params["weights"] = "n0.weights";
  d.spec.ops.push_back(conv);
  OpEvidence e;
  e.anchor = OpKind::Conv;
  e.labels = OperatorLabelVec::from_kinds({OpKind::Conv});
  e.mul_count = 576;
  e.M_w = 128ull * 576 * kElemBytes;
  e.M_o = 128ull * 28 * 28 * kElemBytes;
  e.M_i = 64ull * 56 * 56 * kElemBytes;
  d.evidence["n0_conv"] = e;
  const DraftModel r = apply_rules(d);
  const OpSpec& fixed = r.spec.ops.at(0);
  const Shape wshape = r.spec.params.at("n0.weights").shape();
  o.check(wshape == Shape{128, 64, 3, 3}, "weights " + shape_str(wshape));
  o.check(fixed.attrs.at("K") == 3 && fixed.attrs.at("I_C") == 64 && fixed.attrs.at("O_C") == 128, "K/I_C/O_C");
  const auto shapes = infer_shapes(r.spec);
  o.check(shapes.at("n0_conv") == Shape{1, 128, 28, 28}, "output shape");
  o.check(std::any_of(r.findings.begin(), r.findings.end(), [](const Finding& f) { return f.rule_id == 1 && f.fix_applied; }),
          "rule 1 finding");

  // End to end: im2col-lowered convolutions.
  HarnessOptions ho;
  ho.reshape_conv = true;
  std::size_t fixes = 0;
  for (Style s : {Style::TvmO0, Style::TvmO3}) {
    for (const auto& [name, spec] : models::acceptance_suite(kModelSeed)) {
      if (!conv_count(spec)) continue;
      const std::string tag = name + "/" + style_name(s) + "/im2col";
      auto [bundle, truth] = emit_bundle(spec, CodegenStyle::preset(s), kBundleSeed, ho);
      DecompileOptions opt;
      opt.workers = 2;
      const DecompileResult res = decompile(bundle, &shared_classifier(), opt);
      fixes += std::count_if(res.draft.findings.begin(), res.draft.findings.end(),
                             [](const Finding& f) { return f.rule_id == 1 && f.fix_applied; });
      const auto rep = compare(spec, res.draft.spec, random_inputs(spec, 20, kModelSeed), kRoundTripTol);
      o.check(res.exit_code() == 0 && rep.pass, tag + " exit " + std::to_string(res.exit_code()) + " " + rep.summary());
    }
  }
  o.check(fixes > 0, "no Rule 1 fix in im2col bundles");
  o.notes << "[1,64,56,56] -> [1,128,28,28], n=576 repaired to " << shape_str(wshape) << "; " << fixes
          << " Rule-1 fixes across im2col round trips";
  return o;
}

// 5. Taint soundness on random conv and dense kernels.
Outcome criterion5() {
  Outcome o;
  std::mt19937_64 rng(2026);
  auto pick = [&](std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(rng() % (hi - lo + 1)); };
  double worst_frac = 0, worst_diff = 0;
  for (int t = 0; t < 100; ++t) {
    const bool conv = t % 2 == 0;
    const Style s = kAllStyles[rng() % 3];
    ModelSpec spec;
    // Draws are sequenced explicitly; argument evaluation order is unspecified.
    if (conv) {
      const auto k = pick(1, 3);
      const auto hw = pick(std::max<std::int64_t>(k, 4), 10);
      const auto ic = pick(1, 8);
      const auto oc = pick(2, 16);
      const auto stride = pick(1, 2);
      const auto pad = k > 1 ? pick(0, 1) : 0;
      const bool bias = rng() & 1;
      spec = models::single_conv(ic, oc, hw, k, stride, pad, bias, rng());
    } else {
      const auto m = pick(4, 64);
      const auto n = pick(2, 32);
      const bool bias = rng() & 1;
      spec = models::single_dense(m, n, bias, rng());
    }
    auto [bundle, truth] = emit_bundle(spec, CodegenStyle::preset(s), rng());
    const CallTargets calls = call_targets(bundle);
    const EmittedFunction* anchor = nullptr;
    const CallsiteRecord* site = nullptr;
    for (const auto& c : bundle.callsites) {
      const EmittedFunction* f = truth.function(c.func_id);
      if (f && !f->fused_ops.empty() && (f->fused_ops[0] == OpKind::Conv || f->fused_ops[0] == OpKind::Dense)) {
        anchor = f;
        site = &c;
      }
    }
    if (!anchor) {
      o.check(false, "trace " + std::to_string(t) + " has no anchor kernel");
      continue;
    }
    const int out = find_role(anchor->arg_roles, Role::Out);
    const MemRef sink{site->args.at(static_cast<std::size_t>(out)), 4};
    const auto& trace = bundle.traces.at(site->func_id);
    const TaintedSubtrace sub = taint_backward(trace, std::span(&sink, 1), &calls);
    const SymExpr full = sym_execute(trace, sink, &calls);
    const SymExpr part = sym_execute(sub.entries, sink, &calls);
    auto leaf = [](std::uint64_t a, std::uint32_t) {
      return static_cast<float>(std::sin(static_cast<double>(a) * 0.618) * 0.9);
    };
    const double diff = std::abs(static_cast<double>(evaluate(full, leaf)) - evaluate(part, leaf));
    const double frac = static_cast<double>(sub.entries.size()) / static_cast<double>(trace.size());
    worst_diff = std::max(worst_diff, diff);
    worst_frac = std::max(worst_frac, frac);
    const std::string tag = "trace " + std::to_string(t) + " (" + (conv ? "conv " : "dense ") + style_name(s) + ")";
    o.check(sub.sink_written, tag + " sink not written");
    o.check(diff <= kTaintTol, tag + " diff " + std::to_string(diff));
    o.check(frac <= kTaintMaxFraction, tag + " kept fraction " + std::to_string(frac));
  }
  o.notes << "100 traces, max |full - tainted| = " << worst_diff << ", max kept fraction = " << worst_frac;
  return o;
}

// 6. Operator and provenance classification on a held-out split.
Outcome criterion6() {
  Outcome o;
  const auto corpus =
      emit_corpus(models::corpus_suite(60, 2026), {std::begin(kAllStyles), std::end(kAllStyles)}, 2026);
  o.check(corpus.items.size() >= kCorpusMinFunctions, "corpus too small: " + std::to_string(corpus.items.size()));
  // Split whole executables so provenance is judged per bundle.
  std::map<std::string, std::vector<const LabeledFunction*>> groups;
  for (const auto& it : corpus.items) groups[it.origin + "@" + style_name(it.provenance)].push_back(&it);
  std::vector<std::string> keys;
  for (const auto& [k, v] : groups) keys.push_back(k);
  std::mt19937_64 rng(5);
  std::shuffle(keys.begin(), keys.end(), rng);
  const std::size_t n_train = keys.size() * 7 / 10;
  LabeledCorpus train;
  for (std::size_t i = 0; i < n_train; ++i)
    for (auto* f : groups[keys[i]]) train.items.push_back(*f);
  Classifier c;
  try {
    c = train_classifier(train);
  } catch (const Error& e) {
    o.check(false, e.what());
    return o;
  }
  std::size_t exact = 0, total = 0, prov_ok = 0, prov_total = 0;
  for (std::size_t i = n_train; i < keys.size(); ++i) {
    TraceBundle b;
    for (auto* f : groups[keys[i]]) {
      b.functions.push_back(f->function);
      exact += c.classify(f->function).kinds() == OperatorLabelVec::from_kinds(f->labels).kinds();
      ++total;
    }
    prov_ok += c.predict_provenance(b) == groups[keys[i]].front()->provenance;
    ++prov_total;
  }
  const double acc = total ? static_cast<double>(exact) / static_cast<double>(total) : 0.0;
  const double prov = prov_total ? static_cast<double>(prov_ok) / static_cast<double>(prov_total) : 0.0;
  o.check(acc >= kExactMatchMin, "exact-match " + std::to_string(acc));
  o.check(prov == 1.0, "provenance " + std::to_string(prov));
  o.notes << corpus.items.size() << " functions, " << total << " held out: exact-match " << acc << ", provenance "
          << prov_ok << "/" << prov_total;
  return o;
}

// 7. Cross-style invariance of conv dimensions and constraint semantics.
Outcome criterion7() {
  Outcome o;
  std::size_t compared = 0, pairs = 0, folded = 0;
  for (const auto& [name, spec] : models::acceptance_suite(kModelSeed)) {
    const std::size_t n = conv_count(spec);
    if (!n) continue;
    std::vector<std::vector<std::array<double, 5>>> dims;  // style -> conv -> (K,I_C,O_C,S,P)
    // style -> conv -> (source operators of the kernel, out[0] before bias and activation)
    std::vector<std::vector<std::pair<std::string, double>>> values;
    for (Style s : kAllStyles) {
      auto [bundle, truth] = emit_bundle(spec, CodegenStyle::preset(s), kBundleSeed);
      const DecompileResult r = decompile_oracle(bundle, truth);
      auto& dv = dims.emplace_back();
      for (std::size_t i = 0; i < n; ++i) {
        const OpSpec* c = nth_conv(r.draft.spec, i);
        if (!c) break;
        dv.push_back({c->attrs.at("K"), c->attrs.at("I_C"), c->attrs.at("O_C"), c->attrs.at("S"), c->attrs.at("P")});
      }
      auto& vv = values.emplace_back();
      for (const auto& op : r.ops) {
        if (op.kind != OpKind::Conv) continue;
        std::string sources;
        if (const EmittedFunction* f = truth.function(op.func_id))
          for (const auto& id : f->source_ops)
            for (const auto& src : spec.ops)
              if (src.id == id && (src.kind == OpKind::Conv || src.kind == OpKind::BatchNorm)) sources += id + ",";
        const RoleTaggedConstraint* c0 = nullptr;
        for (const auto& c : op.constraints)
          if (c.output_cell.address == op.output.address) c0 = &c;
        if (!c0) {
          vv.emplace_back(sources, NAN);
          continue;
        }
        SymExpr e = c0->expr;
        // Strip an activation wrapper.
        if (e->op == SymOp::Max) {
          const auto ks = terms(e, SymOp::Max);
          for (const auto& k : ks)
            if (k->op != SymOp::Const) e = k;
        }
        const std::set<std::uint64_t> bias(c0->bias_cells.begin(), c0->bias_cells.end());
        const std::uint64_t call = op.call_index;
        auto leaf = [&](std::uint64_t a, std::uint32_t) -> float {
          if (bias.count(a)) return 0.0f;
          if (bundle.snapshot.contains(a, 4)) return bundle.snapshot.read_f32(a, 1)[0];
          return truth.value_before(a, call).value_or(NAN);
        };
        vv.emplace_back(sources, evaluate(e, leaf));
      }
    }
    for (std::size_t s = 1; s < dims.size(); ++s) {
      o.check(dims[s] == dims[0], name + " conv dims differ for " + style_name(kAllStyles[s]));
      o.check(values[s].size() == values[0].size(), name + " conv count differs");
      for (std::size_t i = 0; i < std::min(values[s].size(), values[0].size()); ++i) {
        const auto& [src_a, a] = values[0][i];
        const auto& [src_b, b] = values[s][i];
        // A kernel that folded a following operator (BatchNorm) computes something else.
        if (src_a != src_b) {
          ++folded;
          continue;
        }
        ++pairs;
        o.check(std::abs(a - b) <= 1e-5 * std::max(1.0, std::abs(a)),
                name + " conv " + std::to_string(i) + " constraint value " + std::to_string(b) + " vs " +
                    std::to_string(a));
      }
    }
    compared += n;
  }
  o.check(pairs > 0, "no constraint pairs compared");
  o.notes << compared << " convolutions agree on (K,I_C,O_C,S,P) across 3 styles; " << pairs
          << " constraint pairs equal modulo Max and bias, " << folded << " pairs skipped as BatchNorm-folded";
  return o;
}

// 8. Reordered weight walks are reported, never silently accepted.
Outcome criterion8() {
  Outcome o;
  HarnessOptions ho;
  ho.adversarial = true;
  std::size_t runs = 0;
  for (const char* name : {"vgg_mini", "resnet_mini"}) {
    ModelSpec spec;
    for (auto& m : models::acceptance_suite(kModelSeed))
      if (m.name == name) spec = m.spec;
    for (Style s : kAllStyles) {
      const std::string tag = std::string(name) + "/" + style_name(s);
      auto [bundle, truth] = emit_bundle(spec, CodegenStyle::preset(s), kBundleSeed, ho);
      DecompileOptions opt;
      opt.workers = 2;
      const DecompileResult r = decompile(bundle, &shared_classifier(), opt);
      o.check(r.exit_code() == 2, tag + " exit " + std::to_string(r.exit_code()));
      o.check(std::any_of(r.draft.findings.begin(), r.draft.findings.end(),
                          [](const Finding& f) { return f.subtype == "LayoutUnrecognized" && f.needs_review(); }),
              tag + " no LayoutUnrecognized finding");
      // Any conv weights that were emitted must be the true ones.
      for (std::size_t i = 0; i < conv_count(spec); ++i) {
        const OpSpec* rec = nth_conv(r.draft.spec, i);
        const OpSpec* src = nth_conv(spec, i);
        if (!rec || !rec->params.count("weights")) continue;
        const Tensor& got = r.draft.spec.params.at(rec->params.at("weights"));
        o.check(got.bit_equal(spec.params.at(src->params.at("weights"))), tag + " conv " + std::to_string(i) + " silently wrong");
      }
      ++runs;
    }
  }
  o.notes << runs << " adversarial bundles exit 2 with LayoutUnrecognized, no wrong weights emitted";
  return o;
}

int run(const std::string& cmd, const fs::path& stdout_file) {
  const std::string full = cmd + " > '" + stdout_file.string() + "' 2>/dev/null";
  const int rc = std::system(full.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

// 9. Every CLI command is byte-for-byte reproducible.
Outcome criterion9(const std::string& cli) {
  Outcome o;
  if (cli.empty() || !fs::exists(cli)) {
    o.check(false, "CLI binary not found: " + cli);
    return o;
  }
  TempDir base("c9");
  std::vector<std::map<std::string, std::string>> trees;
  std::vector<std::vector<int>> codes;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path d = base / ("run" + std::to_string(pass));
    fs::create_directories(d);
    const std::string q = "'" + cli + "'";
    auto at = [&](const std::string& s) { return "'" + (d / s).string() + "'"; };
    // The second pass uses a different worker count on purpose.
    const std::string workers = pass == 0 ? "1" : "3";
    const std::vector<std::string> cmds = {
        q + " gen-corpus --count 12 --seed 4 -o " + at("corpus.jsonl"),
        q + " train-id --seed 4 --corpus " + at("corpus.jsonl") + " -o " + at("clf.bin"),
        q + " gen --model vgg_mini --style tvm-o3 --seed 4 -o " + at("bundle"),
        q + " gen --model resnet_mini --style glow --seed 4 --adversarial -o " + at("adv"),
        q + " classify --bundle " + at("bundle") + " --classifier " + at("clf.bin") + " -o " + at("labels.json"),
        q + " topology --bundle " + at("bundle") + " --classifier " + at("clf.bin") + " -o " + at("graph.json"),
        q + " decompile --workers " + workers + " --bundle " + at("bundle") + " --classifier " + at("clf.bin") +
            " -o " + at("out"),
        q + " decompile --workers " + workers + " --bundle " + at("adv") + " --classifier " + at("clf.bin") +
            " -o " + at("adv-out"),
        q + " verify --seed 4 --source " + at("bundle/source") + " --recovered " + at("out"),
    };
    auto& cv = codes.emplace_back();
    for (std::size_t i = 0; i < cmds.size(); ++i)
      cv.push_back(run(cmds[i], d / ("stdout" + std::to_string(i) + ".txt")));
    trees.push_back(tree(d));
  }
  o.check(codes[0] == codes[1], "exit codes differ");
  for (std::size_t i = 0; i < codes[0].size(); ++i)
    o.check(codes[0][i] == 0 || (i == 7 && codes[0][i] == 2), "command " + std::to_string(i) + " exit " +
                                                                   std::to_string(codes[0][i]));
  std::size_t differing = 0;
  for (const auto& [rel, bytes] : trees[0]) {
    std::string other = bytes;
    // stdout mentions the output path, which is run specific.
    auto it = trees[1].find(rel);
    if (it == trees[1].end()) {
      o.check(false, rel + " missing in second run");
      continue;
    }
    std::string a = bytes, b = it->second;
    for (auto* s : {&a, &b}) {
      for (const char* run_dir : {"run0", "run1"})
        for (std::size_t p; (p = s->find(run_dir)) != std::string::npos;) s->replace(p, 4, "runX");
    }
    if (a != b) {
      ++differing;
      o.check(false, rel + " differs");
    }
  }
  o.check(trees[0].size() == trees[1].size(), "file sets differ");
  o.notes << trees[0].size() << " files compared across two runs, " << differing << " differ";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"round-trip equivalence", criterion1},
      {"tiny-conv golden", criterion2},
      {"layout recovery", criterion3},
      {"rule-1 repair", criterion4},
      {"taint soundness", criterion5},
      {"classifier accuracy", criterion6},
      {"cross-style invariance", criterion7},
      {"adversarial layout", criterion8},
      {"determinism", [&] { return criterion9(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("threw ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << o.notes.str() << std::endl;
  }
  return failed ? 1 : 0;
}
