// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>

#include "nndecomp/error.hpp"
#include "nndecomp/harness.hpp"
#include "support.hpp"

using namespace nnd;
using nnd::testing::kAllStyles;
using nnd::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("emit_bundle is deterministic in its inputs") {
  for (Style s : kAllStyles) {
    auto [a, ta] = emit_bundle(models::vgg_mini(1), CodegenStyle::preset(s), 3);
    auto [b, tb] = emit_bundle(models::vgg_mini(1), CodegenStyle::preset(s), 3);
    CHECK(a == b);
    CHECK(ta.edges == tb.edges);
  }
}

TEST_CASE("bundles survive a disk round trip") {
  for (Style s : kAllStyles) {
    auto [b, truth] = emit_bundle(models::inception_mini(2), CodegenStyle::preset(s), 5);
    TempDir d("bundle");
    write_bundle(b, d.path());
    CHECK(read_bundle(d.path()) == b);
  }
}

TEST_CASE("generated bundles satisfy the schema") {
  for (const auto& [name, spec] : models::acceptance_suite(1))
    for (Style s : kAllStyles) {
      CAPTURE(name);
      auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(s), 1);
      CHECK_NOTHROW(validate(b));
      CHECK(b.provenance_truth == s);
      CHECK(truth.provenance == s);
      // Every callsite refers to a listed function with a trace and an access log.
      for (const auto& c : b.callsites) {
        CHECK(b.function(c.func_id) != nullptr);
        CHECK(b.traces.count(c.func_id) == 1);
        CHECK(b.access_logs.count(c.func_id) == 1);
      }
    }
}

TEST_CASE("validate catches dangling function ids") {
  auto [b, truth] = emit_bundle(models::tiny_conv(), CodegenStyle::preset(Style::Glow), 1);
  b.callsites.front().func_id = 999999;
  CHECK(code_of([&] { validate(b); }) == ErrorCode::DanglingFuncId);
}

TEST_CASE("codegen knobs are validated") {
  CodegenStyle c = CodegenStyle::preset(Style::TvmO3);
  c.layout = LayoutOpt::none();
  for (int lanes : {1, 4, 8}) {
    c.lanes = lanes;
    CHECK_NOTHROW(c.validate());
  }
  c.lanes = 2;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  c = CodegenStyle::preset(Style::TvmO3);
  c.lanes = 4;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
  CodegenStyle g = CodegenStyle::preset(Style::Glow);
  g.layout = LayoutOpt::tvm6d(8, 8);
  CHECK(code_of([&] { g.validate(); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("fusion presets") {
  CHECK_FALSE(CodegenStyle::preset(Style::TvmO0).fusion);
  CHECK(CodegenStyle::preset(Style::TvmO3).fusion);
  CHECK(CodegenStyle::preset(Style::Glow).fusion);
  auto [b, truth] = emit_bundle(models::vgg_mini(1), CodegenStyle::preset(Style::TvmO3), 1);
  bool fused = false;
  for (const auto& f : truth.functions) fused |= f.fused_ops.size() > 1;
  CHECK(fused);
  auto [b0, t0] = emit_bundle(models::vgg_mini(1), CodegenStyle::preset(Style::TvmO0), 1);
  for (const auto& f : t0.functions) CHECK(f.fused_ops.size() <= 1);
}

TEST_CASE("ground-truth history tracks writes") {
  auto [b, truth] = emit_bundle(models::tiny_conv(), CodegenStyle::preset(Style::TvmO0), 1);
  REQUIRE_FALSE(b.callsites.empty());
  const auto& call = b.callsites.back();
  // Input elements are visible before the first call.
  std::size_t initial = 0;
  for (const auto& [addr, hist] : truth.history)
    if (!hist.empty() && hist.front().first == 0) ++initial;
  CHECK(initial >= 9);
  for (std::size_t i = 0; i < 9; ++i) {
    bool found = false;
    for (const auto& [addr, hist] : truth.history)
      if (!hist.empty() && hist.front().first == 0 && hist.front().second == truth.trace_input[i]) found = true;
    CHECK(found);
  }
  CHECK_FALSE(truth.value_before(0xdead0000, call.call_index).has_value());
}

TEST_CASE("snapshot holds parameters only") {
  auto [b, truth] = emit_bundle(models::vgg_mini(2), CodegenStyle::preset(Style::Glow), 1);
  std::size_t floats = 0;
  for (const auto& r : b.snapshot.regions) floats += r.bytes.size() / 4;
  std::size_t param_floats = 0;
  for (const auto& [name, t] : models::vgg_mini(2).params) param_floats += static_cast<std::size_t>(t.numel());
  CHECK(floats == param_floats);
  CHECK(code_of([&] { (void)b.snapshot.read_f32(0x10, 1); }) == ErrorCode::RegionOutOfSnapshot);
}

TEST_CASE("unsupported operator placements are rejected") {
  ModelSpec m = models::bn_model(1);
  // Move BatchNorm after the ReLU, where no backend can fold it.
  std::swap(m.ops[1], m.ops[2]);
  m.ops[1].inputs = {Source::op(m.ops[0].id)};
  m.ops[2].inputs = {Source::op(m.ops[1].id)};
  m.ops[3].inputs = {Source::op(m.ops[2].id)};
  CHECK(code_of([&] { (void)emit_bundle(m, CodegenStyle::preset(Style::Glow), 1); }) == ErrorCode::UnsupportedOperator);
}

TEST_CASE("corpus generation covers every label and style") {
  const LabeledCorpus c = emit_corpus(models::corpus_suite(20, 3), {std::begin(kAllStyles), std::end(kAllStyles)}, 3);
  std::set<OpKind> kinds;
  std::set<Style> styles;
  for (const auto& it : c.items) {
    for (OpKind k : it.labels) kinds.insert(k);
    styles.insert(it.provenance);
  }
  CHECK(styles.size() == 3);
  for (OpKind k : {OpKind::Conv, OpKind::Dense, OpKind::BiasAdd, OpKind::ReLU, OpKind::MaxPool, OpKind::AvgPool,
                   OpKind::LRN, OpKind::Softmax, OpKind::Embedding, OpKind::Add, OpKind::Split, OpKind::Concat,
                   OpKind::Sqrt, OpKind::Reshape})
    CHECK_MESSAGE(kinds.count(k), kind_name(k));

  TempDir d("corpus");
  save_corpus(c, d / "c.jsonl");
  const LabeledCorpus back = load_corpus(d / "c.jsonl");
  REQUIRE(back.items.size() == c.items.size());
  for (std::size_t i = 0; i < c.items.size(); ++i) {
    CHECK(back.items[i].function == c.items[i].function);
    CHECK(back.items[i].labels == c.items[i].labels);
    CHECK(back.items[i].provenance == c.items[i].provenance);
  }
}
