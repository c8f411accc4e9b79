// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "nndecomp/error.hpp"
#include "nndecomp/recover.hpp"
#include "nndecomp/semantics.hpp"
#include "nndecomp/topology.hpp"
#include "support.hpp"

using namespace nnd;
using nnd::testing::kAllStyles;
using nnd::testing::truth_labels;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

/// Input cells of one conv window over a [I_C, IH, IH] tensor at `base`.
RoleTaggedConstraint window(std::uint64_t base, std::int64_t ic, std::int64_t ih, std::int64_t k) {
  RoleTaggedConstraint c;
  for (std::int64_t ch = 0; ch < ic; ++ch)
    for (std::int64_t y = 0; y < k; ++y)
      for (std::int64_t x = 0; x < k; ++x)
        c.input_cells.push_back(base + static_cast<std::uint64_t>(((ch * ih + y) * ih + x) * 4));
  return c;
}

std::vector<std::uint64_t> offsets_of(const LayoutDesc& l, const ConvDims& d, std::int64_t oc) {
  const std::int64_t A = l.kind == LayoutDesc::Kind::Tvm6d ? l.A : 1;
  std::vector<std::uint64_t> out;
  for (std::int64_t icb = 0; icb < d.I_C / A; ++icb)
    for (std::int64_t ky = 0; ky < d.K; ++ky)
      for (std::int64_t ici = 0; ici < A; ++ici)
        for (std::int64_t kx = 0; kx < d.K; ++kx) out.push_back(l.index(oc, icb * A + ici, ky, kx, d.I_C, d.K) * 4);
  return out;
}

}  // namespace

TEST_CASE("kernel size, input channels and row pitch from one window") {
  for (auto [ic, ih, k] : {std::tuple{2, 6, 3}, {3, 8, 5}, {1, 4, 2}, {4, 9, 3}}) {
    const auto kc = conv_kernel_and_ic(window(0x4000, ic, ih, k));
    CHECK(kc.K == k);
    CHECK(kc.I_C == ic);
    CHECK(kc.IH == ih);
  }
  const auto pointwise = conv_kernel_and_ic(window(0x4000, 6, 5, 1));
  CHECK(pointwise.K == 1);
  CHECK(pointwise.I_C == 6);
  CHECK(code_of([] { (void)conv_kernel_and_ic(RoleTaggedConstraint{}); }) == ErrorCode::NonIntegerDim);
}

TEST_CASE("padding and stride") {
  CHECK(conv_padding(10, 8) == 1);
  CHECK(conv_padding(8, 8) == 0);
  CHECK(code_of([] { (void)conv_padding(9, 8); }) == ErrorCode::NonIntegerDim);
  CHECK(code_of([] { (void)conv_padding(6, 8); }) == ErrorCode::NonIntegerDim);

  ConvDims d;
  d.K = 3;
  d.I_C = 2;
  d.P = 1;
  const auto full = conv_oc_and_stride(d, 4 * 5 * 2 * 9, 4 * 2 * 8 * 8, 4 * 5 * 4 * 4);
  CHECK(full.O_C == 5);
  CHECK(full.IH == 8);
  CHECK(full.OH == 4);
  CHECK(full.S == 2);
  CHECK(full.consistent());
  CHECK(code_of([&] { (void)conv_oc_and_stride(d, 4 * 5 * 2 * 9, 4 * 2 * 8 * 8, 4 * 5); }) ==
        ErrorCode::DegenerateOutput);
  CHECK(code_of([&] { (void)conv_oc_and_stride(d, 4 * 5 * 2 * 9 + 4, 4 * 2 * 8 * 8, 4 * 5 * 16); }) ==
        ErrorCode::NonIntegerDim);
}

TEST_CASE("dense and pooling dimensions") {
  RoleTaggedConstraint c;
  c.expr = sym::add(sym::mul(sym::cell(0x10), sym::cell(0x80)), sym::mul(sym::cell(0x14), sym::cell(0x84)));
  const FcDims fc = fc_dims(c, 4 * 7);
  CHECK(fc.M == 2);
  CHECK(fc.N == 7);
  c.expr = sym::max(sym::cell(0x10), sym::cell(0x14));
  CHECK(code_of([&] { (void)fc_dims(c, 28); }) == ErrorCode::ZeroMuls);

  const auto a = window(0x1000, 1, 8, 2), b = window(0x1008, 1, 8, 2);
  const PoolDims p = pool_dims(a, b);
  CHECK(p.K == 2);
  CHECK(p.S == 2);
  CHECK(code_of([&] { (void)pool_dims(a, a); }) == ErrorCode::IdenticalConstraints);
}

TEST_CASE("every layout is a bijection onto its storage") {
  std::mt19937 rng(5);
  for (int t = 0; t < 40; ++t) {
    const std::int64_t A = 1 << (rng() % 3), B = 1 << (rng() % 3);
    const std::int64_t ic = A * (1 + rng() % 3), oc = B * A * (1 + rng() % 2), k = 1 + rng() % 3;
    for (const auto& l : {LayoutDesc::plain(), LayoutDesc::glow5d(A), LayoutDesc::tvm6d(A, B)}) {
      REQUIRE(l.fits(oc, ic));
      const auto n = static_cast<std::uint64_t>(oc * ic * k * k);
      const Shape stored = l.stored_shape(oc, ic, k);
      CHECK(static_cast<std::uint64_t>(std::accumulate(stored.begin(), stored.end(), std::int64_t{1},
                                                       std::multiplies<>())) == n);
      std::set<std::uint64_t> seen;
      for (std::int64_t o = 0; o < oc; ++o)
        for (std::int64_t i = 0; i < ic; ++i)
          for (std::int64_t y = 0; y < k; ++y)
            for (std::int64_t x = 0; x < k; ++x) {
              const auto idx = l.index(o, i, y, x, ic, k);
              CHECK(idx < n);
              seen.insert(idx);
            }
      CHECK(seen.size() == n);
    }
  }
  CHECK_FALSE(LayoutDesc::glow5d(8).fits(12, 4));
  CHECK_FALSE(LayoutDesc::tvm6d(4, 8).fits(16, 6));
  CHECK(LayoutDesc::tvm6d(4, 8).str() == "tvm6d(A=4,B=8)");
}

TEST_CASE("layout detection recognizes each stored form") {
  ConvDims d;
  d.K = 3;
  d.I_C = 8;
  d.O_C = 16;
  for (const auto& l : {LayoutDesc::plain(), LayoutDesc::glow5d(8), LayoutDesc::glow5d(4), LayoutDesc::tvm6d(4, 8),
                        LayoutDesc::tvm6d(8, 16), LayoutDesc::tvm6d(2, 2)}) {
    const auto first = offsets_of(l, d, 0), next = offsets_of(l, d, 1);
    CHECK_MESSAGE(detect_layout(first, d, next) == l, l.str());
  }
  auto reversed = offsets_of(LayoutDesc::plain(), d, 0);
  for (std::size_t i = 0; i + 3 <= reversed.size(); i += 3) std::reverse(reversed.begin() + i, reversed.begin() + i + 3);
  CHECK(code_of([&] { (void)detect_layout(reversed, d); }) == ErrorCode::LayoutUnrecognized);
  CHECK(code_of([&] { (void)detect_layout({}, d); }) == ErrorCode::LayoutUnrecognized);
}

TEST_CASE("recovered convolutions match their source") {
  std::mt19937 rng(23);
  const auto& sigs = SignatureConfig::builtin();
  for (int t = 0; t < 12; ++t) {
    const std::int64_t ic = 1 + rng() % 4, oc = 2 + rng() % 6, k = 1 + rng() % 3, s = 1 + rng() % 2, p = rng() % 2;
    const std::int64_t hw = k + s + 2 + rng() % 5;
    const ModelSpec spec = models::single_conv(ic, oc, hw, k, s, p, rng() & 1, 100 + t);
    const OpSpec& conv = spec.ops.front();
    for (Style style : kAllStyles) {
      auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(style), 7);
      const FunctionLabels labels = truth_labels(truth);
      const CallTargets calls = call_targets(b);
      bool found = false;
      for (const auto& site : b.callsites) {
        const auto& l = labels.at(site.func_id);
        if (!l.has(OpKind::Conv)) continue;
        OperatorContext ctx;
        ctx.bundle = &b;
        ctx.call = &site;
        ctx.signature = &callsite_signature(site, l, sigs, style);
        ctx.labels = l;
        ctx.calls = &calls;
        const RecoveredOp op = recover_operator(ctx);
        REQUIRE_MESSAGE(!op.error, op.error_message);
        found = true;
        CHECK(op.kind == OpKind::Conv);
        for (const char* key : {"K", "I_C", "O_C"}) CHECK(op.dim(key) == conv.attr(key));
        if (op.dim("OH") > 1) CHECK(op.dim("S") == conv.attr("S"));
        CHECK(op.params.at("weights").bit_equal(spec.param(conv, "weights")));
        if (conv.has_param("bias") && l.has(OpKind::BiasAdd)) {
          REQUIRE(op.params.count("bias"));
          CHECK(op.params.at("bias").bit_equal(spec.param(conv, "bias")));
        }
      }
      CHECK(found);
    }
  }
}

TEST_CASE("recovered dense layers match their source") {
  const auto& sigs = SignatureConfig::builtin();
  for (auto [m, n] : {std::pair{16, 4}, {9, 3}, {32, 10}})
    for (Style style : kAllStyles) {
      const ModelSpec spec = models::single_dense(m, n, true, 3);
      auto [b, truth] = emit_bundle(spec, CodegenStyle::preset(style), 2);
      const FunctionLabels labels = truth_labels(truth);
      const CallTargets calls = call_targets(b);
      for (const auto& site : b.callsites) {
        const auto& l = labels.at(site.func_id);
        if (!l.has(OpKind::Dense)) continue;
        OperatorContext ctx{&b, &site, &callsite_signature(site, l, sigs, style), l, TaintPolicy::Auto, &calls};
        const RecoveredOp op = recover_operator(ctx);
        REQUIRE_MESSAGE(!op.error, op.error_message);
        CHECK(op.dim("M") == m);
        CHECK(op.dim("N") == n);
        CHECK(op.params.at("weights").bit_equal(spec.param(spec.ops.front(), "weights")));
        CHECK_FALSE(op.constraint_text().empty());
      }
    }
}
