// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>

#include "nndecomp/error.hpp"
#include "nndecomp/rules.hpp"
#include "support.hpp"

using namespace nnd;
using nnd::testing::TempDir;

namespace {

Tensor filled(Shape s, float v = 0.5f) {
  Tensor t(std::move(s));
  std::fill(t.data().begin(), t.data().end(), v);
  return t;
}

OpEvidence evidence(std::uint64_t call, OpKind anchor, std::vector<OpKind> kinds) {
  OpEvidence e;
  e.call_index = call;
  e.func_id = static_cast<FuncId>(100 + call);
  e.anchor = anchor;
  e.labels = OperatorLabelVec::from_kinds(kinds);
  return e;
}

/// input [1,4] -> dense(4->3) -> out
DraftModel dense_draft() {
  DraftModel d;
  d.spec.input_shape = {1, 4};
  OpSpec op;
  op.id = "n0_dense";
  op.kind = OpKind::Dense;
  op.inputs = {Source::model_input()};
  op.attrs = {{"M", 4}, {"N", 3}};
  op.params["weights"] = "n0.weights";
  d.spec.params["n0.weights"] = filled({3, 4});
  d.spec.ops.push_back(op);
  d.evidence[op.id] = evidence(0, OpKind::Dense, {OpKind::Dense});
  return d;
}

std::vector<Finding> with_rule(const DraftModel& d, int rule) {
  std::vector<Finding> out;
  for (const auto& f : d.findings)
    if (f.rule_id == rule) out.push_back(f);
  return out;
}

}  // namespace

TEST_CASE("conv dimension repair recovers the kernel from neighbouring shapes") {
  std::mt19937 rng(41);
  for (int t = 0; t < 300; ++t) {
    ConvDims truth;
    truth.K = 1 + rng() % 5;
    truth.S = 1 + rng() % 3;
    truth.P = rng() % truth.K;
    truth.I_C = 1 + rng() % 8;
    truth.O_C = 1 + rng() % 8;
    truth.IH = truth.K + rng() % 12;
    truth.OH = (truth.IH + 2 * truth.P - truth.K) / truth.S + 1;
    REQUIRE(truth.consistent());
    const ConvDims r = repair_conv_dims({1, truth.I_C, truth.IH, truth.IH}, {1, truth.O_C, truth.OH, truth.OH},
                                        truth.I_C * truth.K * truth.K);
    CHECK(r.consistent());
    CHECK(r.K == truth.K);
    CHECK(r.I_C == truth.I_C);
    CHECK(r.O_C == truth.O_C);
    CHECK(r.OH == truth.OH);
  }
  CHECK_THROWS_AS(repair_conv_dims({1, 3, 8, 8}, {1, 4, 8, 8}, 28), Error);
  CHECK_THROWS_AS(repair_conv_dims({1, 3, 8, 8}, {1, 4, 8, 8}, 24), Error);
  CHECK_THROWS_AS(repair_conv_dims({1, 24}, {1, 4, 8, 8}, 27), Error);
}

TEST_CASE("rule 1 rebuilds a broken convolution") {
  DraftModel d;
  d.spec.input_shape = {1, 3, 8, 8};
  OpSpec conv;
  conv.id = "n0_conv";
  conv.kind = OpKind::Conv;
  conv.inputs = {Source::model_input()};
  conv.attrs = {{"K", 2.5}, {"S", 1}, {"P", 1}, {"I_C", 3}, {"O_C", 4}};
  conv.params["weights"] = "n0.weights";
  d.spec.params["n0.weights"] = filled({108});
  d.spec.ops.push_back(conv);
  OpEvidence e = evidence(0, OpKind::Conv, {OpKind::Conv});
  e.mul_count = 27;
  e.M_w = 4 * 108;
  e.M_i = 4 * 3 * 64;
  e.M_o = 4 * 4 * 64;
  e.error = ErrorCode::NonIntegerDim;
  e.error_message = "K";
  d.evidence[conv.id] = e;

  const DraftModel out = apply_rules(d);
  const OpSpec& fixed = out.spec.ops.front();
  CHECK(fixed.attr("K") == 3);
  CHECK(fixed.attr("S") == 1);
  CHECK(fixed.attr("P") == 1);
  CHECK(out.spec.params.at("n0.weights").shape() == Shape{4, 3, 3, 3});
  const auto f1 = with_rule(out, 1);
  REQUIRE(f1.size() == 1);
  CHECK(f1[0].fix_applied);
  CHECK(f1[0].op_id == "n0_conv");
  CHECK(f1[0].func_id == 100);
  CHECK(f1[0].before != f1[0].after);
  // The repaired NonIntegerDim does not also go to review.
  CHECK(with_rule(out, 6).empty());
  CHECK_NOTHROW(validate(out.spec));
}

TEST_CASE("rule 2 turns a constant addition into a bias addition") {
  DraftModel d;
  d.spec.input_shape = {1, 4};
  OpSpec add;
  add.id = "n0_add";
  add.kind = OpKind::Add;
  add.inputs = {Source::param("n0.in1"), Source::model_input()};
  d.spec.params["n0.in1"] = filled({4});
  d.spec.ops.push_back(add);
  d.evidence[add.id] = evidence(0, OpKind::Add, {OpKind::Add});

  const DraftModel out = apply_rules(d);
  const OpSpec& op = out.spec.ops.front();
  CHECK(op.kind == OpKind::BiasAdd);
  CHECK(op.inputs == std::vector<Source>{Source::model_input()});
  CHECK(op.params.at("bias") == "n0.in1");
  REQUIRE(with_rule(out, 2).size() == 1);
  CHECK(with_rule(out, 2)[0].subtype == "add-to-biasadd");
}

TEST_CASE("rule 3 relabels a split that writes its whole input") {
  DraftModel d;
  d.spec.input_shape = {1, 8};
  OpSpec split;
  split.id = "n0_split";
  split.kind = OpKind::Split;
  split.inputs = {Source::model_input()};
  split.attrs = {{"offset", 0}, {"size", 1}};
  d.spec.ops.push_back(split);
  OpEvidence e = evidence(0, OpKind::Split, {OpKind::Split});
  e.written_bytes = 32;
  d.evidence[split.id] = e;

  const DraftModel out = apply_rules(d);
  REQUIRE(out.relabel.count(100));
  CHECK(out.relabel.at(100).has(OpKind::Concat));
  CHECK_FALSE(out.relabel.at(100).has(OpKind::Split));
  CHECK(with_rule(out, 3).size() == 1);

  e.written_bytes = 16;
  d.evidence[split.id] = e;
  CHECK(apply_rules(d).relabel.empty());
}

TEST_CASE("rule 4 removes a ReLU the constraint does not support") {
  DraftModel d = dense_draft();
  OpSpec relu;
  relu.id = "n0_relu";
  relu.kind = OpKind::ReLU;
  relu.inputs = {Source::op("n0_dense")};
  d.spec.ops.push_back(relu);
  OpSpec soft;
  soft.id = "n1_softmax";
  soft.kind = OpKind::Softmax;
  soft.inputs = {Source::op("n0_relu")};
  d.spec.ops.push_back(soft);
  OpEvidence e = evidence(0, OpKind::Dense, {OpKind::Dense, OpKind::ReLU});
  e.mul_count = 4;
  d.evidence["n0_dense"] = e;
  e.is_activation = true;
  d.evidence["n0_relu"] = e;
  d.evidence["n1_softmax"] = evidence(1, OpKind::Softmax, {OpKind::Softmax});

  const DraftModel out = apply_rules(d);
  REQUIRE(out.spec.ops.size() == 2);
  CHECK(out.spec.ops[1].inputs == std::vector<Source>{Source::op("n0_dense")});
  REQUIRE(with_rule(out, 4).size() == 1);
  CHECK(with_rule(out, 4)[0].subtype == "relu-removed");
}

TEST_CASE("rule 4 adds a ReLU the labels missed") {
  DraftModel d = dense_draft();
  d.evidence["n0_dense"].has_max = true;
  d.evidence["n0_dense"].mul_count = 4;
  const DraftModel out = apply_rules(d);
  REQUIRE(out.spec.ops.size() == 2);
  CHECK(out.spec.ops[1].kind == OpKind::ReLU);
  CHECK(out.spec.ops[1].inputs == std::vector<Source>{Source::op("n0_dense")});
  REQUIRE(with_rule(out, 4).size() == 1);
  CHECK(with_rule(out, 4)[0].subtype == "relu-added");
  CHECK(out.spec.outputs() == std::vector<std::string>{out.spec.ops[1].id});
}

TEST_CASE("rule 5 flags low-confidence labels for review") {
  DraftModel d = dense_draft();
  auto& l = d.evidence["n0_dense"].labels;
  for (std::size_t i = 0; i < kNumLabels; ++i)
    if (l.bits[i]) l.confidences[i] = 0.55;
  const DraftModel out = apply_rules(d);
  const auto f5 = with_rule(out, 5);
  REQUIRE(f5.size() == 1);
  CHECK(f5[0].needs_review());
  CHECK(with_rule(apply_rules(dense_draft()), 5).empty());
}

TEST_CASE("rule 6 reports recovery failures and shape mismatches") {
  DraftModel d = dense_draft();
  d.evidence["n0_dense"].error = ErrorCode::LayoutUnrecognized;
  d.evidence["n0_dense"].error_message = "weights out of order";
  d.spec.ops[0].attrs["M"] = 5;
  d.spec.params["n0.weights"] = filled({3, 5});
  const DraftModel out = apply_rules(d);
  const auto f6 = with_rule(out, 6);
  REQUIRE(f6.size() == 2);
  CHECK(f6[0].subtype == "LayoutUnrecognized");
  CHECK(f6[1].subtype == "shape-mismatch");
  for (const auto& f : f6) CHECK(f.needs_review());
}

TEST_CASE("rules are idempotent") {
  std::vector<DraftModel> drafts;
  drafts.push_back(dense_draft());
  drafts.back().evidence["n0_dense"].has_max = true;
  drafts.push_back(dense_draft());
  drafts.back().evidence["n0_dense"].error = ErrorCode::ZeroMuls;
  for (const auto& spec : {models::vgg_mini(3), models::inception_mini(3)}) {
    auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(Style::TvmO3), 4);
    drafts.push_back(nnd::testing::decompile_oracle(b, truth).draft);
  }
  for (const auto& d : drafts) {
    const DraftModel once = apply_rules(d);
    const DraftModel twice = apply_rules(once);
    CHECK(twice.findings == once.findings);
    CHECK(twice.spec.structurally_equal(once.spec));
    CHECK(twice.relabel == once.relabel);
  }
}

TEST_CASE("findings file round trip") {
  TempDir dir("rules");
  std::vector<Finding> fs(2);
  fs[0] = {1, 7, 3, "n3_conv", "conv-dims", "rebuilt", true, "Conv K=2.5", "Conv K=3"};
  fs[1] = {6, 9, 4, "n4_dense", "shape-mismatch", "M differs", false, "", ""};
  write_findings(fs, dir / "findings.json");
  CHECK(read_findings(dir / "findings.json") == fs);
  write_findings({}, dir / "empty.json");
  CHECK(read_findings(dir / "empty.json").empty());
}
