// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "nndecomp/error.hpp"
#include "nndecomp/evaluator.hpp"
#include "nndecomp/harness.hpp"
#include "nndecomp/model.hpp"
#include "support.hpp"

using namespace nnd;
using nnd::testing::TempDir;

namespace {

// Independent per-op reference: plain loops over NCHW with explicit padding.
struct Ref {
  std::vector<float> v;
  std::int64_t c = 0, h = 0;  // h == 0: flat vector
};

Ref ref_conv(const Ref& x, const Tensor& w, const Tensor* b, std::int64_t K, std::int64_t S, std::int64_t P) {
  const std::int64_t OC = w.shape()[0], OH = (x.h + 2 * P - K) / S + 1;
  Ref y{std::vector<float>(static_cast<std::size_t>(OC * OH * OH)), OC, OH};
  for (std::int64_t oc = 0; oc < OC; ++oc)
    for (std::int64_t oy = 0; oy < OH; ++oy)
      for (std::int64_t ox = 0; ox < OH; ++ox) {
        float acc = 0.0f;
        for (std::int64_t ic = 0; ic < x.c; ++ic)
          for (std::int64_t ky = 0; ky < K; ++ky)
            for (std::int64_t kx = 0; kx < K; ++kx) {
              const std::int64_t iy = oy * S + ky - P, ix = ox * S + kx - P;
              if (iy < 0 || ix < 0 || iy >= x.h || ix >= x.h) continue;
              acc += x.v[static_cast<std::size_t>((ic * x.h + iy) * x.h + ix)] *
                     w[static_cast<std::size_t>(((oc * x.c + ic) * K + ky) * K + kx)];
            }
        if (b) acc += (*b)[static_cast<std::size_t>(oc)];
        y.v[static_cast<std::size_t>((oc * OH + oy) * OH + ox)] = acc;
      }
  return y;
}

Ref ref_pool(const Ref& x, bool is_max) {
  const std::int64_t OH = x.h / 2;
  Ref y{std::vector<float>(static_cast<std::size_t>(x.c * OH * OH)), x.c, OH};
  for (std::int64_t c = 0; c < x.c; ++c)
    for (std::int64_t oy = 0; oy < OH; ++oy)
      for (std::int64_t ox = 0; ox < OH; ++ox) {
        float m = -INFINITY, s = 0.0f;
        for (std::int64_t dy = 0; dy < 2; ++dy)
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const float v = x.v[static_cast<std::size_t>((c * x.h + 2 * oy + dy) * x.h + 2 * ox + dx)];
            m = std::max(m, v);
            s += v;
          }
        y.v[static_cast<std::size_t>((c * OH + oy) * OH + ox)] = is_max ? m : s * 0.25f;
      }
  return y;
}

Ref ref_dense(const Ref& x, const Tensor& w, const Tensor& b) {
  const std::int64_t N = w.shape()[0], M = w.shape()[1];
  Ref y{std::vector<float>(static_cast<std::size_t>(N)), 0, 0};
  for (std::int64_t n = 0; n < N; ++n) {
    float acc = 0.0f;
    for (std::int64_t m = 0; m < M; ++m) acc += x.v[static_cast<std::size_t>(m)] * w[static_cast<std::size_t>(n * M + m)];
    y.v[static_cast<std::size_t>(n)] = acc + b[static_cast<std::size_t>(n)];
  }
  return y;
}

Tensor random_tensor(Shape s, std::mt19937& rng, float scale) {
  Tensor t(std::move(s));
  std::uniform_real_distribution<float> u(-scale, scale);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

struct RandomNet {
  ModelSpec spec;
  std::int64_t K, S, P;
  bool max_pool;
};

RandomNet random_net(std::uint32_t seed) {
  std::mt19937 rng(seed);
  auto pick = [&](std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(rng() % (hi - lo + 1)); };
  RandomNet n;
  const std::int64_t C = pick(1, 4);
  const std::int64_t H = pick(6, 10);
  const std::int64_t OC = pick(2, 6);
  n.K = pick(1, 3);
  n.S = pick(1, 2);
  n.P = n.K > 1 ? pick(0, 1) : 0;
  n.max_pool = rng() & 1;
  const std::int64_t OH = (H + 2 * n.P - n.K) / n.S + 1, PH = OH / 2, N = pick(3, 8);
  ModelSpec& m = n.spec;
  m.input_shape = {1, C, H, H};
  m.params["w1"] = random_tensor({OC, C, n.K, n.K}, rng, 0.5f);
  m.params["b1"] = random_tensor({OC}, rng, 0.1f);
  m.params["w2"] = random_tensor({N, OC * PH * PH}, rng, 0.3f);
  m.params["b2"] = random_tensor({N}, rng, 0.1f);
  OpSpec conv{"conv", OpKind::Conv, {Source::model_input()},
              {{"K", double(n.K)}, {"S", double(n.S)}, {"P", double(n.P)}, {"O_C", double(OC)}, {"I_C", double(C)}},
              {{"weights", "w1"}, {"bias", "b1"}}};
  OpSpec relu{"relu", OpKind::ReLU, {Source::op("conv")}, {}, {}};
  OpSpec pool{"pool", n.max_pool ? OpKind::MaxPool : OpKind::AvgPool, {Source::op("relu")}, {{"K", 2}, {"S", 2}}, {}};
  OpSpec flat{"flat", OpKind::Flatten, {Source::op("pool")}, {}, {}};
  OpSpec fc{"fc", OpKind::Dense, {Source::op("flat")}, {{"M", double(OC * PH * PH)}, {"N", double(N)}},
            {{"weights", "w2"}, {"bias", "b2"}}};
  OpSpec sm{"sm", OpKind::Softmax, {Source::op("fc")}, {}, {}};
  m.ops = {conv, relu, pool, flat, fc, sm};
  return n;
}

}  // namespace

TEST_CASE("forward: 2x2 kernel over a 3x3 input") {
  const ModelSpec spec = models::tiny_conv();
  Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor& w = spec.param(spec.ops[0], "weights");
  const Tensor y = forward(spec, x);
  REQUIRE(y.shape() == Shape{1, 1, 2, 2});
  const int tl[4] = {0, 1, 3, 4};
  for (int i = 0; i < 4; ++i) {
    const int base = tl[i];
    const float want = x[base] * w[0] + x[base + 1] * w[1] + x[base + 3] * w[2] + x[base + 4] * w[3];
    CHECK(y[i] == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("forward: identity 1x1 convolution") {
  ModelSpec m;
  m.input_shape = {1, 1, 4, 4};
  m.params["w"] = Tensor({1, 1, 1, 1}, {1.0f});
  m.ops = {{"c", OpKind::Conv, {Source::model_input()}, {{"K", 1}, {"S", 1}, {"P", 0}, {"O_C", 1}, {"I_C", 1}},
            {{"weights", "w"}}}};
  const auto x = random_inputs(m, 1, 9)[0];
  CHECK(forward(m, x).values() == x.values());
}

TEST_CASE("forward: random small CNNs match the per-op reference") {
  for (std::uint32_t seed = 1; seed <= 25; ++seed) {
    const RandomNet n = random_net(seed);
    const ModelSpec& m = n.spec;
    for (const auto& x : random_inputs(m, 3, seed)) {
      Ref r{x.values(), m.input_shape[1], m.input_shape[2]};
      r = ref_conv(r, m.params.at("w1"), &m.params.at("b1"), n.K, n.S, n.P);
      for (auto& v : r.v) v = std::max(v, 0.0f);
      r = ref_pool(r, n.max_pool);
      r = ref_dense(r, m.params.at("w2"), m.params.at("b2"));
      double mx = -INFINITY, sum = 0;
      for (float v : r.v) mx = std::max<double>(mx, v);
      for (float v : r.v) sum += std::exp(v - mx);
      const Tensor y = forward(m, x);
      REQUIRE(static_cast<std::size_t>(y.numel()) == r.v.size());
      for (std::size_t i = 0; i < r.v.size(); ++i) CHECK(std::abs(y[i] - std::exp(r.v[i] - mx) / sum) <= 1e-6);
    }
  }
}

TEST_CASE("forward is deterministic") {
  const ModelSpec m = models::vgg_mini(3);
  const auto x = random_inputs(m, 1, 4)[0];
  CHECK(forward(m, x).bit_equal(forward(m, x)));
}

TEST_CASE("compare: self, perturbed, and shape mismatches") {
  const ModelSpec m = models::resnet_mini(2);
  const auto inputs = random_inputs(m, 5, 1);
  const auto self = compare(m, m, inputs);
  CHECK(self.pass);
  CHECK(self.worst_diff() == 0.0);

  ModelSpec p = m;
  auto& w = p.params.at(p.ops[0].params.at("weights"));
  w[0] += 1.0f;
  const auto rep = compare(m, p, inputs);
  CHECK_FALSE(rep.pass);
  CHECK(rep.worst_diff() > 1e-2);
}

TEST_CASE("save/load round trip is bit exact") {
  for (const auto& [name, spec] : models::acceptance_suite(5)) {
    CAPTURE(name);
    TempDir d("spec");
    save_spec(spec, d.path());
    const ModelSpec back = load_spec(d.path());
    CHECK(back.structurally_equal(spec));
    for (const auto& [pname, t] : spec.params) CHECK(back.params.at(pname).bit_equal(t));
  }
}

TEST_CASE("save/load round trip over random models") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelSpec spec = models::random_cnn(seed);
    TempDir d("rspec");
    save_spec(spec, d.path());
    const ModelSpec back = load_spec(d.path());
    CHECK(back.structurally_equal(spec));
    const auto x = random_inputs(spec, 1, seed)[0];
    CHECK(forward(back, x).bit_equal(forward(spec, x)));
  }
}

TEST_CASE("load_spec reports missing and truncated tensors") {
  const ModelSpec spec = models::tiny_conv();
  TempDir d("bad");
  save_spec(spec, d.path());
  const auto params = d.path() / "params";
  REQUIRE(std::filesystem::exists(params));
  auto first = std::filesystem::directory_iterator(params)->path();

  SUBCASE("truncated") {
    std::filesystem::resize_file(first, 4);
    try {
      (void)load_spec(d.path());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TensorSizeMismatch);
    }
  }
  SUBCASE("missing") {
    std::filesystem::remove(first);
    CHECK_THROWS_AS((void)load_spec(d.path()), Error);
  }
}

TEST_CASE("validate rejects convolutions that break the dimension constraint") {
  ModelSpec m = models::single_conv(2, 4, 8, 3, 1, 1, false, 1);
  CHECK_NOTHROW(validate(m));
  m.ops[0].attrs["I_C"] = 3;
  CHECK_THROWS_AS(validate(m), Error);
}

TEST_CASE("window_out follows the dimension constraint") {
  CHECK(window_out(56, 3, 2, 1) == 28);
  CHECK(window_out(3, 2, 1, 0) == 2);
  CHECK_FALSE(window_out(2, 5, 1, 0).has_value());
}
