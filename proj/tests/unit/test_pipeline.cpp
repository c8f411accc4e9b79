// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>

#include "nndecomp/error.hpp"
#include "nndecomp/evaluator.hpp"
#include "nndecomp/pipeline.hpp"
#include "support.hpp"

using namespace nnd;
using nnd::testing::decompile_oracle;
using nnd::testing::kAllStyles;
using nnd::testing::slurp;
using nnd::testing::TempDir;

TEST_CASE("a clean decompilation is equivalent to its source") {
  int clean = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const ModelSpec spec = seed % 4 == 0 ? models::random_text(seed) : models::random_cnn(seed);
    for (Style s : kAllStyles) {
      auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(s), seed);
      const DecompileResult r = decompile_oracle(b, truth);
      ++total;
      if (r.needs_review()) continue;
      ++clean;
      CHECK_NOTHROW(validate(r.draft.spec));
      const auto report = compare(spec, r.draft.spec, random_inputs(spec, 5, seed));
      CHECK_MESSAGE(report.pass, "seed " << seed << " " << std::string(style_name(s)) << ": " << report.summary());
    }
  }
  CHECK(clean == total);
}

TEST_CASE("the acceptance models decompile cleanly in every style") {
  for (const auto& [name, spec] : models::acceptance_suite(7))
    for (Style s : kAllStyles) {
      auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(s), 11);
      const DecompileResult r = decompile_oracle(b, truth);
      CHECK_MESSAGE(r.exit_code() == 0, name << " " << std::string(style_name(s)));
      CHECK(r.draft.spec.input_shape == spec.input_shape);
      CHECK(compare(spec, r.draft.spec, random_inputs(spec, 3, 1)).pass);
    }
}

TEST_CASE("adversarial bundles go to review") {
  auto [b, truth] = emit_bundle(models::vgg_mini(2), CodegenStyle::preset(Style::TvmO3), 3, {.adversarial = true});
  const DecompileResult r = decompile_oracle(b, truth);
  CHECK(r.needs_review());
  CHECK(r.exit_code() == 2);
}

TEST_CASE("a kernel wider than its padded input goes to review") {
  // Every window of a 3x3 pad-1 conv over a 2x2 map is clipped by padding.
  auto [b, truth] = emit_bundle(models::single_conv(4, 4, 2, 3, 1, 1, true, 1), CodegenStyle::preset(Style::TvmO3), 1);
  const DecompileResult r = decompile_oracle(b, truth);
  CHECK(r.needs_review());
}

TEST_CASE("stack spills do not count as operator output") {
  auto [b, truth] = emit_bundle(models::inception_mini(2), CodegenStyle::preset(Style::TvmO3), 2);
  const DecompileResult r = decompile_oracle(b, truth);
  for (const auto& op : r.ops)
    if (op.kind == OpKind::Split) CHECK(op.written_bytes == op.M_o);
  for (const auto& f : r.draft.findings) CHECK(f.rule_id != 3);
}

TEST_CASE("worker count does not change the result") {
  auto [b, truth] = emit_bundle(models::inception_mini(4), CodegenStyle::preset(Style::Glow), 4);
  DecompileOptions o;
  o.labels = nnd::testing::truth_labels(truth);
  o.style = truth.provenance;
  o.workers = 1;
  const DecompileResult one = decompile(b, nullptr, o);
  o.workers = 4;
  const DecompileResult four = decompile(b, nullptr, o);
  CHECK(one.graph == four.graph);
  CHECK(one.draft.findings == four.draft.findings);
  CHECK(one.draft.spec.structurally_equal(four.draft.spec));
  CHECK(render_report(one, b) == render_report(four, b));
}

TEST_CASE("stage callbacks and option errors") {
  auto [b, truth] = emit_bundle(models::tiny_conv(), CodegenStyle::preset(Style::TvmO0), 1);
  CHECK_THROWS_AS(decompile(b, nullptr, {}), Error);
  DecompileOptions o;
  o.labels = nnd::testing::truth_labels(truth);
  o.style = truth.provenance;
  std::vector<std::string> stages;
  o.on_stage = [&](const std::string& stage, double) { stages.push_back(stage); };
  (void)decompile(b, nullptr, o);
  CHECK(std::find(stages.begin(), stages.end(), "topology") != stages.end());
  CHECK(std::find(stages.begin(), stages.end(), "rules") != stages.end());
  CHECK(std::find(stages.begin(), stages.end(), "classify") == stages.end());
}

TEST_CASE("export writes every artifact and reloads") {
  TempDir dir("export");
  auto [b, truth] = emit_bundle(models::resnet_mini(3), CodegenStyle::preset(Style::TvmO3), 5);
  const DecompileResult r = decompile_oracle(b, truth);
  export_result(r, b, dir.path());
  for (const char* f : {"model.json", "labels.json", "graph.json", "findings.json", "report.md"})
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  CHECK(std::filesystem::is_directory(dir / "constraints"));
  for (const auto& op : r.ops)
    CHECK(std::filesystem::exists(dir / ("constraints/call" + std::to_string(op.call_index) + ".txt")));
  CHECK(load_spec(dir.path()).structurally_equal(r.draft.spec));
  CHECK(read_graph(dir / "graph.json") == r.graph);
  CHECK(read_labels(dir / "labels.json") == r.labels);
  CHECK(read_findings(dir / "findings.json") == r.draft.findings);
  CHECK(slurp(dir / "report.md") == render_report(r, b));

  TempDir again("export");
  export_result(decompile_oracle(b, truth), b, again.path());
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path()))
    if (e.is_regular_file())
      CHECK(slurp(e.path()) == slurp(again.path() / std::filesystem::relative(e.path(), dir.path())));
}
