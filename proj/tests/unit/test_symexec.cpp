// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "nndecomp/error.hpp"
#include "nndecomp/semantics.hpp"
#include "nndecomp/symexec.hpp"
#include "nndecomp/symexpr.hpp"
#include "nndecomp/taint.hpp"
#include "support.hpp"

using namespace nnd;
using nnd::testing::kAllStyles;

namespace {

SymExpr random_expr(std::mt19937& rng, int depth) {
  const auto r = rng() % 10;
  if (depth == 0 || r < 3) {
    if (rng() & 1) return sym::cell(0x1000 + 4 * (rng() % 6));
    return sym::constant(static_cast<double>(static_cast<int>(rng() % 7) - 3) * 0.5);
  }
  auto a = random_expr(rng, depth - 1), b = random_expr(rng, depth - 1);
  switch (r) {
    case 3: return sym::add(a, b);
    case 4: return sym::sub(a, b);
    case 5: return sym::mul(a, b);
    case 6: return sym::max(a, b);
    case 7: return sym::neg(a);
    case 8: return sym::min(a, b);
    default: return sym::add(sym::mul(a, b), sym::constant(0.0));
  }
}

float leaf_of(std::uint64_t a, std::uint32_t) { return static_cast<float>(std::cos(static_cast<double>(a) * 0.37)); }

/// Final value the harness wrote to `address` during call `call`.
std::optional<float> written_by(const GroundTruth& t, std::uint64_t address, std::uint64_t call) {
  auto it = t.history.find(address);
  if (it == t.history.end()) return std::nullopt;
  std::optional<float> v;
  for (const auto& [writer, value] : it->second)
    if (writer == call + 1) v = value;
  return v;
}

}  // namespace

TEST_CASE("simplify preserves evaluation") {
  std::mt19937 rng(17);
  for (int i = 0; i < 500; ++i) {
    const SymExpr e = random_expr(rng, 4);
    const SymExpr s = simplify(e);
    const float a = evaluate(e, leaf_of), b = evaluate(s, leaf_of);
    CHECK(std::abs(a - b) <= 1e-5f * std::max(1.0f, std::abs(a)));
    CHECK(structurally_equal(simplify(s), s));
  }
}

TEST_CASE("simplify normal form") {
  const auto x = sym::cell(0x10), y = sym::cell(0x14);
  CHECK(structurally_equal(simplify(sym::add(x, sym::constant(0))), x));
  CHECK(structurally_equal(simplify(sym::mul(x, sym::constant(1))), x));
  CHECK(structurally_equal(simplify(sym::mul(x, sym::constant(0))), sym::constant(0)));
  CHECK(structurally_equal(simplify(sym::sub(sym::constant(0), x)), sym::neg(x)));
  const auto nested = simplify(sym::add(sym::add(x, y), sym::add(y, x)));
  CHECK(terms(nested, SymOp::Add).size() == 4);
  CHECK(count_op(simplify(sym::max(sym::max(x, sym::constant(0)), sym::constant(0))), SymOp::Max) == 1);
}

TEST_CASE("expression queries") {
  const auto e = sym::add(sym::mul(sym::cell(0x20), sym::cell(0x40)), sym::mul(sym::cell(0x24), sym::constant(2)));
  const auto cs = cells(e);
  REQUIRE(cs.size() == 3);
  CHECK(cs[0].address == 0x20);
  CHECK(cs[1].address == 0x40);
  CHECK(cs[2].address == 0x24);
  CHECK(count_op(e, SymOp::Mul) == 2);
  CHECK(contains_op(e, SymOp::Add));
  CHECK_FALSE(contains_op(e, SymOp::Max));
  CHECK(constants(e) == std::vector<double>{2});
  CHECK_FALSE(to_string(e).empty());
}

TEST_CASE("symbolic execution reproduces every value the generator computed") {
  const std::vector<ModelSpec> specs = {models::vgg_mini(4), models::text_model(4), models::bn_model(4),
                                        models::inception_mini(4)};
  for (const auto& spec : specs)
    for (Style s : kAllStyles) {
      auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(s), 2);
      const CallTargets calls = call_targets(b);
      std::size_t checked = 0;
      for (const auto& site : b.callsites) {
        const auto& trace = b.traces.at(site.func_id);
        std::vector<MemRef> sinks;
        std::set<std::uint64_t> seen;
        for (const auto& e : trace)
          for (const auto& w : e.writes)
            if (w.width == 4 && written_by(truth, w.address, site.call_index) && seen.insert(w.address).second &&
                sinks.size() < 12)
              sinks.push_back(w);
        if (sinks.empty()) continue;
        const auto exprs = sym_execute(trace, sinks, &calls);
        auto leaf = [&](std::uint64_t a, std::uint32_t) -> float {
          if (b.snapshot.contains(a, 4)) return b.snapshot.read_f32(a, 1)[0];
          return truth.value_before(a, site.call_index).value_or(NAN);
        };
        for (std::size_t i = 0; i < sinks.size(); ++i) {
          const float want = *written_by(truth, sinks[i].address, site.call_index);
          const float got = evaluate(exprs[i], leaf);
          CHECK_MESSAGE(std::abs(got - want) <= 1e-5f * std::max(1.0f, std::abs(want)),
                        style_name(s) << " call " << site.call_index << ": " << to_string(exprs[i]));
          ++checked;
        }
      }
      CHECK(checked > 0);
    }
}

TEST_CASE("the tainted subtrace yields the same constraint") {
  for (Style s : kAllStyles)
    for (const auto& spec : {models::vgg_mini(6), models::resnet_mini(6)}) {
      auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(s), 6);
      const CallTargets calls = call_targets(b);
      for (const auto& site : b.callsites) {
        const auto* f = truth.function(site.func_id);
        if (!f || f->fused_ops.empty()) continue;
        const int out = find_role(f->arg_roles, Role::Out);
        if (out < 0) continue;
        const MemRef sink{site.args.at(static_cast<std::size_t>(out)), 4};
        const auto& trace = b.traces.at(site.func_id);
        const auto sub = taint_backward(trace, std::span(&sink, 1), &calls);
        CHECK(sub.entries.size() <= trace.size());
        CHECK(std::is_sorted(sub.entries.begin(), sub.entries.end(),
                             [](const TraceEntry& x, const TraceEntry& y) { return x.seq_no < y.seq_no; }));
        CHECK(structurally_equal(simplify(sym_execute(trace, sink, &calls)),
                                 simplify(sym_execute(sub.entries, sink, &calls))));
      }
    }
}

TEST_CASE("taint and symbolic execution errors") {
  const MemRef sink{0x1000, 4};
  try {
    (void)taint_backward({}, std::span(&sink, 1));
    FAIL("expected EmptyTrace");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTrace);
  }
  TraceEntry odd;
  odd.opcode = "frobnicate";
  std::vector<TraceEntry> trace = {odd};
  try {
    (void)sym_execute(trace, sink);
    FAIL("expected UnmodeledOpcode");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnmodeledOpcode);
  }
  CHECK_FALSE(is_modeled("frobnicate"));
  CHECK(is_modeled("vfmadd231ps"));
}

TEST_CASE("taint policy") {
  CHECK(taint_applies(TaintPolicy::Auto, OpKind::Conv));
  CHECK(taint_applies(TaintPolicy::Auto, OpKind::Dense));
  CHECK_FALSE(taint_applies(TaintPolicy::Auto, OpKind::ReLU));
  CHECK(taint_applies(TaintPolicy::Always, OpKind::ReLU));
  CHECK_FALSE(taint_applies(TaintPolicy::Never, OpKind::Conv));
  for (auto p : {TaintPolicy::Auto, TaintPolicy::Always, TaintPolicy::Never})
    CHECK(parse_taint_policy(taint_policy_name(p)) == p);
  CHECK_THROWS_AS(parse_taint_policy("sometimes"), Error);
}

TEST_CASE("region scoping separates tensors") {
  auto [b, truth] = emit_bundle(models::single_conv(3, 8, 8, 3, 1, 1, true, 1), CodegenStyle::preset(Style::TvmO3), 1);
  for (const auto& site : b.callsites) {
    const auto* f = truth.function(site.func_id);
    if (!f || f->fused_ops.empty() || f->fused_ops.front() != OpKind::Conv) continue;
    const ScopedRegions r = scope_regions(b.access_logs.at(site.func_id), site, f->arg_roles);
    const MemRegion& w = r.region(f->arg_roles, Role::Weights);
    CHECK(w.base == site.args.at(static_cast<std::size_t>(find_role(f->arg_roles, Role::Weights))));
    CHECK(w.size == 8 * 3 * 3 * 3 * 4);
    const MemRegion& bias = r.region(f->arg_roles, Role::Biases);
    CHECK(bias.size == 8 * 4);
    CHECK_FALSE(w.contains(bias.base));
  }
}

TEST_CASE("a slice far into its input is scoped through the offset argument") {
  const Signature& sig = SignatureConfig::builtin().lookup(Style::TvmO3, OpKind::Split, 3);
  CallsiteRecord call{0, 1, {0x10000000, 0x20000000, 0x480}};
  MemAccessLog log;
  for (std::uint64_t i = 0; i < 64; ++i) {
    log.reads.push_back({0x10000000 + 0x480 * 4 + 4 * i, 4});
    log.writes.push_back({0x20000000 + 4 * i, 4});
  }
  log.normalize();
  const ScopedRegions r = scope_regions(log, call, sig);
  const MemRegion& in = r.region(sig, Role::In);
  CHECK(in.base == 0x10000000 + 0x480 * 4);
  CHECK(in.size == 256);
  CHECK(r.region(sig, Role::Out).size == 256);
}
