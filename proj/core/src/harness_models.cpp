// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "nndecomp/harness.hpp"

namespace nnd::models {

namespace {

class Builder {
 public:
  Builder(Shape input, std::uint64_t seed) : rng_(seed) { m_.input_shape = std::move(input); }

  std::string conv(const std::string& in, std::int64_t ic, std::int64_t oc, std::int64_t k, std::int64_t s,
                   std::int64_t p, bool bias) {
    OpSpec& op = add(OpKind::Conv, {in});
    op.attrs = {{"K", k}, {"S", s}, {"P", p}, {"I_C", ic}, {"O_C", oc}};
    op.params["weights"] = param(op.id + ".w", {oc, ic, k, k}, 1.0 / std::sqrt(static_cast<double>(ic * k * k)));
    if (bias) op.params["bias"] = param(op.id + ".b", {oc}, 0.1);
    return op.id;
  }
  std::string dense(const std::string& in, std::int64_t m, std::int64_t n, bool bias) {
    OpSpec& op = add(OpKind::Dense, {in});
    op.attrs = {{"M", m}, {"N", n}};
    op.params["weights"] = param(op.id + ".w", {n, m}, 1.0 / std::sqrt(static_cast<double>(m)));
    if (bias) op.params["bias"] = param(op.id + ".b", {n}, 0.1);
    return op.id;
  }
  std::string bias_add(const std::string& in, std::int64_t c) {
    OpSpec& op = add(OpKind::BiasAdd, {in});
    op.params["bias"] = param(op.id + ".b", {c}, 0.1);
    return op.id;
  }
  std::string unary(OpKind kind, const std::string& in) { return add(kind, {in}).id; }
  std::string binary(OpKind kind, const std::string& a, const std::string& b) { return add(kind, {a, b}).id; }
  std::string pool(OpKind kind, const std::string& in, std::int64_t k, std::int64_t s) {
    OpSpec& op = add(kind, {in});
    op.attrs = {{"K", k}, {"S", s}};
    return op.id;
  }
  std::string lrn(const std::string& in, std::int64_t size) {
    OpSpec& op = add(OpKind::LRN, {in});
    op.attrs = {{"size", size}, {"alpha", 1e-4}, {"beta", 0.75}, {"bias", 1.0}};
    return op.id;
  }
  std::string batchnorm(const std::string& in, std::int64_t c) {
    OpSpec& op = add(OpKind::BatchNorm, {in});
    op.attrs = {{"eps", 1e-5}};
    op.params["gamma"] = param(op.id + ".gamma", {c}, 0.5, 1.0);
    op.params["beta"] = param(op.id + ".beta", {c}, 0.1);
    op.params["mean"] = param(op.id + ".mean", {c}, 0.1);
    op.params["var"] = param(op.id + ".var", {c}, 0.5, 1.0);
    return op.id;
  }
  std::string embedding(const std::string& in, std::int64_t vocab, std::int64_t d) {
    OpSpec& op = add(OpKind::Embedding, {in});
    op.params["weights"] = param(op.id + ".w", {vocab, d}, 1.0);
    return op.id;
  }
  std::string split(const std::string& in, std::int64_t offset, std::int64_t size) {
    OpSpec& op = add(OpKind::Split, {in});
    op.attrs = {{"offset", offset}, {"size", size}};
    return op.id;
  }

  ModelSpec take() { return std::move(m_); }

 private:
  static Source source(const std::string& id) { return id.empty() ? Source::model_input() : Source::op(id); }

  OpSpec& add(OpKind kind, const std::vector<std::string>& inputs) {
    OpSpec op;
    op.id = std::string(kind_name(kind)) + "_" + std::to_string(m_.ops.size());
    for (auto& c : op.id) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    op.kind = kind;
    for (const auto& s : inputs) op.inputs.push_back(source(s));
    m_.ops.push_back(std::move(op));
    return m_.ops.back();
  }

  /// Uniform in [center - spread, center + spread].
  std::string param(const std::string& name, Shape shape, double spread, double center = 0.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<float>(center + spread * (2.0 * unit() - 1.0));
    m_.params[name] = std::move(t);
    return name;
  }
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  ModelSpec m_;
  std::mt19937_64 rng_;
};

/// Output positions along one axis whose window lies inside the unpadded input.
std::int64_t interior_windows(std::int64_t h, std::int64_t k, std::int64_t s, std::int64_t p) {
  const std::int64_t first = (p + s - 1) / s, last = (h - k + p) / s;
  return std::max<std::int64_t>(0, last - first + 1);
}

}  // namespace

ModelSpec tiny_conv() {
  Builder b({1, 1, 3, 3}, 4);
  b.conv("", 1, 1, 2, 1, 0, false);
  return b.take();
}

ModelSpec vgg_mini(std::uint64_t seed) {
  Builder b({1, 3, 16, 16}, seed);
  auto x = b.conv("", 3, 8, 3, 1, 1, false);
  x = b.bias_add(x, 8);
  x = b.unary(OpKind::ReLU, x);
  x = b.lrn(x, 5);
  x = b.pool(OpKind::MaxPool, x, 2, 2);
  x = b.conv(x, 8, 16, 3, 1, 1, true);
  x = b.unary(OpKind::ReLU, x);
  x = b.pool(OpKind::AvgPool, x, 2, 2);
  x = b.unary(OpKind::Flatten, x);
  x = b.dense(x, 256, 32, true);
  x = b.unary(OpKind::ReLU, x);
  x = b.dense(x, 32, 10, true);
  b.unary(OpKind::Softmax, x);
  return b.take();
}

ModelSpec resnet_mini(std::uint64_t seed) {
  Builder b({1, 8, 8, 8}, seed);
  auto x = b.conv("", 8, 8, 3, 1, 1, true);
  x = b.unary(OpKind::ReLU, x);
  x = b.conv(x, 8, 8, 3, 1, 1, true);
  x = b.binary(OpKind::Add, x, "");
  x = b.unary(OpKind::ReLU, x);
  x = b.conv(x, 8, 16, 1, 2, 0, true);
  x = b.unary(OpKind::ReLU, x);
  x = b.pool(OpKind::MaxPool, x, 2, 2);
  x = b.unary(OpKind::Flatten, x);
  b.dense(x, 64, 10, true);
  return b.take();
}

ModelSpec text_model(std::uint64_t seed) {
  Builder b({1, 8}, seed);
  auto x = b.embedding("", 50, 16);
  x = b.unary(OpKind::Flatten, x);
  x = b.dense(x, 128, 32, true);
  x = b.unary(OpKind::ReLU, x);
  x = b.dense(x, 32, 4, true);
  b.unary(OpKind::Softmax, x);
  return b.take();
}

ModelSpec bn_model(std::uint64_t seed) {
  Builder b({1, 4, 8, 8}, seed);
  auto x = b.conv("", 4, 8, 3, 1, 1, false);
  x = b.batchnorm(x, 8);
  x = b.unary(OpKind::ReLU, x);
  x = b.pool(OpKind::MaxPool, x, 2, 2);
  x = b.unary(OpKind::Flatten, x);
  b.dense(x, 128, 10, true);
  return b.take();
}

ModelSpec inception_mini(std::uint64_t seed) {
  Builder b({1, 8, 8, 8}, seed);
  auto s1 = b.split("", 0, 4);
  auto s2 = b.split("", 4, 4);
  auto c1 = b.conv(s1, 4, 8, 1, 1, 0, true);
  auto c2 = b.conv(s2, 4, 8, 3, 1, 1, true);
  auto x = b.binary(OpKind::Concat, c1, c2);
  x = b.unary(OpKind::ReLU, x);
  x = b.pool(OpKind::AvgPool, x, 2, 2);
  x = b.unary(OpKind::Flatten, x);
  b.dense(x, 256, 8, true);
  return b.take();
}

ModelSpec single_conv(std::int64_t in_c, std::int64_t out_c, std::int64_t hw, std::int64_t k, std::int64_t s,
                      std::int64_t p, bool bias, std::uint64_t seed) {
  Builder b({1, in_c, hw, hw}, seed);
  b.conv("", in_c, out_c, k, s, p, bias);
  return b.take();
}

ModelSpec single_dense(std::int64_t m, std::int64_t n, bool bias, std::uint64_t seed) {
  Builder b({1, m}, seed);
  b.dense("", m, n, bias);
  return b.take();
}

ModelSpec random_cnn(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::initializer_list<std::int64_t> xs) { return *(xs.begin() + rng() % xs.size()); };
  auto coin = [&] { return (rng() & 1) != 0; };
  std::int64_t c = pick({1, 2, 3, 4, 8}), h = pick({6, 8, 10, 12});
  Builder b({1, c, h, h}, rng());
  std::string x;
  const auto blocks = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < blocks; ++i) {
    std::int64_t k = pick({1, 2, 3}), s = pick({1, 1, 2}), p = k > 1 ? pick({0, 1}) : 0;
    // Keep at least a 2x2 map, and two unpadded windows per row when padding.
    if (h - k + 1 < 2) k = 1, p = 0;
    if (p > 0 && interior_windows(h, k, s, p) < 2) p = 0;
    if ((h + 2 * p - k) / s + 1 < 2) s = 1;
    const std::int64_t oc = pick({4, 8, 16});
    const bool bias = coin(), inline_bias = bias && coin();
    x = b.conv(x, c, oc, k, s, p, inline_bias);
    if (bias && !inline_bias)
      x = b.bias_add(x, oc);
    else if (rng() % 4 == 0)
      x = b.batchnorm(x, oc);
    c = oc;
    h = (h + 2 * p - k) / s + 1;
    if (coin()) x = b.unary(OpKind::ReLU, x);
    if (rng() % 5 == 0) x = b.lrn(x, pick({3, 5}));
    if (interior_windows(h, 3, 1, 1) >= 2 && rng() % 4 == 0) {
      auto y = b.conv(x, c, c, 3, 1, 1, true);
      x = b.unary(OpKind::ReLU, b.binary(OpKind::Add, y, x));
    }
    if (c >= 4 && interior_windows(h, 3, 1, 1) >= 2 && rng() % 5 == 0) {
      const std::int64_t half = c / 2;
      auto l = b.conv(b.split(x, 0, half), half, 4, 1, 1, 0, true);
      auto r = b.conv(b.split(x, half, c - half), c - half, 4, 3, 1, 1, true);
      x = b.binary(OpKind::Concat, l, r);
      c = 8;
    }
    if (h >= 4 && coin()) {
      x = b.pool(coin() ? OpKind::MaxPool : OpKind::AvgPool, x, 2, 2);
      h = (h - 2) / 2 + 1;
    }
  }
  x = b.unary(OpKind::Flatten, x);
  const std::int64_t n = pick({4, 8, 10, 16});
  x = b.dense(x, c * h * h, n, coin());
  if (coin()) {
    x = b.unary(OpKind::ReLU, x);
    x = b.dense(x, n, 4, true);
  }
  if (coin()) b.unary(OpKind::Softmax, x);
  return b.take();
}

ModelSpec random_text(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::initializer_list<std::int64_t> xs) { return *(xs.begin() + rng() % xs.size()); };
  const std::int64_t len = pick({4, 6, 8}), d = pick({4, 8, 16}), n = pick({8, 16, 32});
  Builder b({1, len}, rng());
  auto x = b.unary(OpKind::Flatten, b.embedding("", pick({20, 50, 100}), d));
  x = b.dense(x, len * d, n, (rng() & 1) != 0);
  if (rng() & 1) x = b.unary(OpKind::ReLU, x);
  x = b.dense(x, n, pick({2, 4}), true);
  if (rng() & 1) b.unary(OpKind::Softmax, x);
  return b.take();
}

std::vector<NamedSpec> acceptance_suite(std::uint64_t seed) {
  return {{"vgg_mini", vgg_mini(seed)},
          {"resnet_mini", resnet_mini(seed + 1)},
          {"text_model", text_model(seed + 2)},
          {"bn_model", bn_model(seed + 3)},
          {"inception_mini", inception_mini(seed + 4)}};
}

std::vector<NamedSpec> corpus_suite(std::size_t count, std::uint64_t seed) {
  std::vector<NamedSpec> out = acceptance_suite(seed);
  out.push_back({"tiny_conv", tiny_conv()});
  for (std::size_t i = 0; out.size() < count; ++i)
    if (i % 5 == 4)
      out.push_back({"random_text_" + std::to_string(i), random_text(seed * 7919 + i)});
    else
      out.push_back({"random_cnn_" + std::to_string(i), random_cnn(seed * 7919 + i)});
  out.resize(std::min(out.size(), std::max<std::size_t>(count, 1)));
  return out;
}

}  // namespace nnd::models
