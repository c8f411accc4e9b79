// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Per-stage microbenchmarks on generated bundles.

#include <benchmark/benchmark.h>

#include "nndecomp/evaluator.hpp"
#include "nndecomp/harness.hpp"
#include "nndecomp/pipeline.hpp"
#include "nndecomp/symexec.hpp"
#include "nndecomp/taint.hpp"

namespace {

using namespace nnd;

struct Fixture {
  TraceBundle bundle;
  GroundTruth truth;
  FunctionLabels labels;
  const CallsiteRecord* conv = nullptr;
  MemRef sink;

  explicit Fixture(Style s) {
    std::tie(bundle, truth) = emit_bundle(models::vgg_mini(1), CodegenStyle::preset(s), 1);
    for (const auto& f : truth.functions) labels[f.func_id] = OperatorLabelVec::from_kinds(f.fused_ops);
    for (const auto& c : bundle.callsites) {
      const EmittedFunction* f = truth.function(c.func_id);
      if (!conv && f && !f->fused_ops.empty() && f->fused_ops[0] == OpKind::Conv) {
        conv = &c;
        sink = {c.args.at(static_cast<std::size_t>(find_role(f->arg_roles, Role::Out))), 4};
      }
    }
  }
};

const Fixture& fixture(Style s) {
  static const Fixture f[] = {Fixture(Style::TvmO0), Fixture(Style::TvmO3), Fixture(Style::Glow)};
  return f[static_cast<int>(s)];
}

void BM_EmitBundle(benchmark::State& state) {
  const ModelSpec spec = models::vgg_mini(1);
  const auto style = CodegenStyle::preset(static_cast<Style>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(emit_bundle(spec, style, 1));
}
BENCHMARK(BM_EmitBundle)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_Classify(benchmark::State& state) {
  static const Classifier c = train_classifier(emit_corpus(models::corpus_suite(12, 1), {Style::TvmO0, Style::Glow}, 1));
  const auto& f = fixture(Style::Glow);
  for (auto _ : state)
    for (const auto& fn : f.bundle.functions) benchmark::DoNotOptimize(c.classify(fn));
}
BENCHMARK(BM_Classify)->Unit(benchmark::kMicrosecond);

void BM_Topology(benchmark::State& state) {
  const auto& f = fixture(Style::Glow);
  for (auto _ : state)
    benchmark::DoNotOptimize(recover_topology(f.bundle, f.labels, SignatureConfig::builtin(), Style::Glow));
}
BENCHMARK(BM_Topology)->Unit(benchmark::kMicrosecond);

void BM_TaintConv(benchmark::State& state) {
  const auto& f = fixture(static_cast<Style>(state.range(0)));
  const auto calls = call_targets(f.bundle);
  const auto& trace = f.bundle.traces.at(f.conv->func_id);
  for (auto _ : state) benchmark::DoNotOptimize(taint_backward(trace, std::span(&f.sink, 1), &calls));
  state.counters["entries"] = static_cast<double>(trace.size());
}
BENCHMARK(BM_TaintConv)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_SymExecConv(benchmark::State& state) {
  const auto& f = fixture(static_cast<Style>(state.range(0)));
  const auto calls = call_targets(f.bundle);
  const auto sub = taint_backward(f.bundle.traces.at(f.conv->func_id), std::span(&f.sink, 1), &calls);
  for (auto _ : state) benchmark::DoNotOptimize(simplify(sym_execute(sub.entries, f.sink, &calls)));
  state.counters["entries"] = static_cast<double>(sub.entries.size());
}
BENCHMARK(BM_SymExecConv)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_Decompile(benchmark::State& state) {
  const auto& f = fixture(static_cast<Style>(state.range(0)));
  DecompileOptions o;
  o.labels = f.labels;
  o.style = f.truth.provenance;
  o.workers = 1;
  for (auto _ : state) benchmark::DoNotOptimize(decompile(f.bundle, nullptr, o));
}
BENCHMARK(BM_Decompile)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const ModelSpec spec = models::vgg_mini(1);
  const auto inputs = random_inputs(spec, 1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(spec, inputs[0]));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
