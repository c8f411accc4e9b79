// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "nndecomp/error.hpp"

namespace nnd {

namespace {

/// Index into `small` for element `i` of a tensor with shape `big`.
struct BroadcastIndex {
  std::int64_t small_n = 1, big_n = 1, channels = 1, inner = 1;

  BroadcastIndex(const Shape& big, const Shape& small) : small_n(numel(small)), big_n(numel(big)) {
    if (big.size() >= 2) {
      channels = big[1];
      inner = 1;
      for (std::size_t d = 2; d < big.size(); ++d) inner *= big[d];
    }
  }
  std::int64_t operator()(std::int64_t i) const {
    if (small_n == big_n) return i;
    if (small_n == 1) return 0;
    return (i / inner) % channels;
  }
};

using Binary = float (*)(float, float);

Tensor binary_op(const Tensor& a, const Tensor& b, const Shape& out_shape, Binary f) {
  Tensor out(out_shape);
  BroadcastIndex ia(out_shape, a.shape()), ib(out_shape, b.shape());
  for (std::int64_t i = 0; i < out.numel(); ++i)
    out[static_cast<std::size_t>(i)] = f(a[static_cast<std::size_t>(ia(i))], b[static_cast<std::size_t>(ib(i))]);
  return out;
}

Tensor conv(const Tensor& in, const Tensor& w, const Tensor* bias, const OpSpec& op, const Shape& out_shape) {
  const auto K = op.iattr("K"), S = op.iattr("S"), P = op.iattr("P"), IC = op.iattr("I_C"), OC = op.iattr("O_C");
  const auto H = in.shape()[2], OH = out_shape[2];
  Tensor out(out_shape);
  for (std::int64_t oc = 0; oc < OC; ++oc)
    for (std::int64_t oy = 0; oy < OH; ++oy)
      for (std::int64_t ox = 0; ox < OH; ++ox) {
        float acc = 0.0f;
        for (std::int64_t ic = 0; ic < IC; ++ic)
          for (std::int64_t ky = 0; ky < K; ++ky) {
            std::int64_t iy = oy * S - P + ky;
            if (iy < 0 || iy >= H) continue;
            for (std::int64_t kx = 0; kx < K; ++kx) {
              std::int64_t ix = ox * S - P + kx;
              if (ix < 0 || ix >= H) continue;
              acc += in[static_cast<std::size_t>((ic * H + iy) * H + ix)] *
                     w[static_cast<std::size_t>(((oc * IC + ic) * K + ky) * K + kx)];
            }
          }
        if (bias) acc += (*bias)[static_cast<std::size_t>(oc)];
        out[static_cast<std::size_t>((oc * OH + oy) * OH + ox)] = acc;
      }
  return out;
}

Tensor dense(const Tensor& in, const Tensor& w, const Tensor* bias, const OpSpec& op) {
  const auto M = op.iattr("M"), N = op.iattr("N");
  Tensor out({1, N});
  for (std::int64_t n = 0; n < N; ++n) {
    float acc = 0.0f;
    for (std::int64_t m = 0; m < M; ++m) acc += in[static_cast<std::size_t>(m)] * w[static_cast<std::size_t>(n * M + m)];
    if (bias) acc += (*bias)[static_cast<std::size_t>(n)];
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

Tensor pool(const Tensor& in, const OpSpec& op, const Shape& out_shape, bool is_max) {
  const auto K = op.iattr("K"), S = op.iattr("S");
  const auto C = in.shape()[1], H = in.shape()[2], OH = out_shape[2];
  const float inv = 1.0f / static_cast<float>(K * K);
  Tensor out(out_shape);
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t oy = 0; oy < OH; ++oy)
      for (std::int64_t ox = 0; ox < OH; ++ox) {
        float acc = is_max ? -INFINITY : 0.0f;
        for (std::int64_t ky = 0; ky < K; ++ky)
          for (std::int64_t kx = 0; kx < K; ++kx) {
            float v = in[static_cast<std::size_t>((c * H + oy * S + ky) * H + ox * S + kx)];
            acc = is_max ? std::max(acc, v) : acc + v;
          }
        out[static_cast<std::size_t>((c * OH + oy) * OH + ox)] = is_max ? acc : acc * inv;
      }
  return out;
}

/// d^beta; beta = 0.75 is evaluated as sqrt(d) * sqrt(sqrt(d)) to match the
/// generated kernels bit for bit.
float lrn_pow(float d, double beta) {
  if (beta == 0.75) {
    float s = std::sqrt(d);
    return s * std::sqrt(s);
  }
  return static_cast<float>(std::pow(static_cast<double>(d), beta));
}

Tensor lrn(const Tensor& in, const OpSpec& op) {
  const auto n = op.iattr("size");
  const float alpha = static_cast<float>(op.attr_or("alpha", 1e-4));
  const double beta = op.attr_or("beta", 0.75);
  const float k = static_cast<float>(op.attr_or("bias", 1.0));
  const float scale = alpha / static_cast<float>(n);
  const auto& s = in.shape();
  const auto C = s[1];
  std::int64_t inner = 1;
  for (std::size_t d = 2; d < s.size(); ++d) inner *= s[d];
  Tensor out(s);
  const std::int64_t lo_off = (n - 1) / 2, hi_off = n / 2;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < inner; ++i) {
      float sum = 0.0f;
      for (std::int64_t cc = std::max<std::int64_t>(0, c - lo_off); cc <= std::min(C - 1, c + hi_off); ++cc) {
        float v = in[static_cast<std::size_t>(cc * inner + i)];
        sum += v * v;
      }
      float d = sum * scale + k;
      out[static_cast<std::size_t>(c * inner + i)] = in[static_cast<std::size_t>(c * inner + i)] / lrn_pow(d, beta);
    }
  return out;
}

Tensor softmax(const Tensor& in) {
  Tensor out(in.shape());
  float mx = -INFINITY;
  for (float v : in.data()) mx = std::max(mx, v);
  float sum = 0.0f;
  for (std::int64_t i = 0; i < in.numel(); ++i) {
    float e = std::exp(in[static_cast<std::size_t>(i)] - mx);
    out[static_cast<std::size_t>(i)] = e;
    sum += e;
  }
  for (auto& v : out.data()) v = v / sum;
  return out;
}

Tensor embedding(const Tensor& in, const Tensor& table, const Shape& out_shape) {
  const auto N = table.shape()[0], D = table.shape()[1];
  Tensor out(out_shape);
  for (std::int64_t t = 0; t < in.numel(); ++t) {
    auto idx = static_cast<std::int64_t>(in[static_cast<std::size_t>(t)]);
    if (idx < 0 || idx >= N) fail(ErrorCode::InvalidArgument, "embedding index " + std::to_string(idx) + " out of range");
    for (std::int64_t d = 0; d < D; ++d)
      out[static_cast<std::size_t>(t * D + d)] = table[static_cast<std::size_t>(idx * D + d)];
  }
  return out;
}

Tensor batchnorm(const Tensor& in, const ModelSpec& spec, const OpSpec& op) {
  const Tensor& g = spec.param(op, "gamma");
  const Tensor& b = spec.param(op, "beta");
  const Tensor& m = spec.param(op, "mean");
  const Tensor& v = spec.param(op, "var");
  const float eps = static_cast<float>(op.attr_or("eps", 1e-5));
  Tensor out(in.shape());
  BroadcastIndex ch(in.shape(), g.shape());
  for (std::int64_t i = 0; i < in.numel(); ++i) {
    auto c = static_cast<std::size_t>(ch(i));
    out[static_cast<std::size_t>(i)] = (in[static_cast<std::size_t>(i)] - m[c]) / std::sqrt(v[c] + eps) * g[c] + b[c];
  }
  return out;
}

Tensor slice_channels(const Tensor& in, std::int64_t offset, const Shape& out_shape) {
  std::int64_t inner = 1;
  for (std::size_t d = 2; d < in.shape().size(); ++d) inner *= in.shape()[d];
  Tensor out(out_shape);
  std::copy_n(in.data().begin() + offset * inner, out.numel(), out.data().begin());
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b, const Shape& out_shape) {
  Tensor out(out_shape);
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.numel());
  return out;
}

}  // namespace

std::map<std::string, Tensor> forward_all(const ModelSpec& spec, const Tensor& input) {
  if (input.shape() != spec.input_shape)
    fail(ErrorCode::ShapeMismatch, "input shape " + shape_str(input.shape()) + " != model input " + shape_str(spec.input_shape));
  auto shapes = infer_shapes(spec);
  std::map<std::string, Tensor> values;
  for (const auto& op : spec.ops) {
    std::vector<const Tensor*> in;
    for (const auto& s : op.inputs) {
      switch (s.kind) {
        case Source::Kind::ModelInput: in.push_back(&input); break;
        case Source::Kind::Op: in.push_back(&values.at(s.name)); break;
        case Source::Kind::Param: in.push_back(&spec.params.at(s.name)); break;
      }
    }
    const Shape& os = shapes.at(op.id);
    auto opt_bias = [&]() -> const Tensor* { return op.has_param("bias") ? &spec.param(op, "bias") : nullptr; };
    Tensor out;
    switch (op.kind) {
      case OpKind::Conv: out = conv(*in[0], spec.param(op, "weights"), opt_bias(), op, os); break;
      case OpKind::Dense: out = dense(*in[0], spec.param(op, "weights"), opt_bias(), op); break;
      case OpKind::BiasAdd:
        out = binary_op(*in[0], spec.param(op, "bias"), os, [](float x, float y) { return x + y; });
        break;
      case OpKind::Add: out = binary_op(*in[0], *in[1], os, [](float x, float y) { return x + y; }); break;
      case OpKind::Multiply: out = binary_op(*in[0], *in[1], os, [](float x, float y) { return x * y; }); break;
      case OpKind::Divide: out = binary_op(*in[0], *in[1], os, [](float x, float y) { return x / y; }); break;
      case OpKind::ReLU:
        out = Tensor(os);
        for (std::int64_t i = 0; i < out.numel(); ++i)
          out[static_cast<std::size_t>(i)] = std::max((*in[0])[static_cast<std::size_t>(i)], 0.0f);
        break;
      case OpKind::Sqrt:
        out = Tensor(os);
        for (std::int64_t i = 0; i < out.numel(); ++i)
          out[static_cast<std::size_t>(i)] = std::sqrt((*in[0])[static_cast<std::size_t>(i)]);
        break;
      case OpKind::Negative:
        out = Tensor(os);
        for (std::int64_t i = 0; i < out.numel(); ++i)
          out[static_cast<std::size_t>(i)] = 0.0f - (*in[0])[static_cast<std::size_t>(i)];
        break;
      case OpKind::MaxPool: out = pool(*in[0], op, os, true); break;
      case OpKind::AvgPool: out = pool(*in[0], op, os, false); break;
      case OpKind::LRN: out = lrn(*in[0], op); break;
      case OpKind::Softmax: out = softmax(*in[0]); break;
      case OpKind::Embedding: out = embedding(*in[0], spec.param(op, "weights"), os); break;
      case OpKind::BatchNorm: out = batchnorm(*in[0], spec, op); break;
      case OpKind::Concat: out = concat(*in[0], *in[1], os); break;
      case OpKind::Split: out = slice_channels(*in[0], op.iattr("offset"), os); break;
      case OpKind::Flatten: out = Tensor(os, in[0]->values()); break;
      default: fail(ErrorCode::SchemaViolation, "cannot evaluate " + std::string(kind_name(op.kind)));
    }
    if (out.shape() != os) fail(ErrorCode::ShapeMismatch, "op " + op.id + " produced " + shape_str(out.shape()));
    values.emplace(op.id, std::move(out));
  }
  return values;
}

Tensor forward(const ModelSpec& spec, const Tensor& input) {
  auto values = forward_all(spec, input);
  auto outs = spec.outputs();
  if (outs.size() == 1) return values.at(outs.front());
  std::vector<float> flat;
  for (const auto& id : outs) {
    const auto& v = values.at(id).values();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  auto n = static_cast<std::int64_t>(flat.size());
  return Tensor({1, n}, std::move(flat));
}

std::vector<Tensor> random_inputs(const ModelSpec& spec, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::int64_t vocab = 0;
  for (const auto& op : spec.ops)
    for (const auto& s : op.inputs)
      if (s.kind == Source::Kind::ModelInput && op.kind == OpKind::Embedding)
        vocab = spec.param(op, "weights").shape()[0];
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor t(spec.input_shape);
    for (auto& v : t.data()) {
      if (vocab > 0)
        v = static_cast<float>(static_cast<std::int64_t>(unit() * static_cast<double>(vocab)) % vocab);
      else
        v = static_cast<float>(unit() * 2.0 - 1.0);
    }
    out.push_back(std::move(t));
  }
  return out;
}

double EquivalenceReport::worst_diff() const {
  double w = 0.0;
  for (const auto& c : per_input) w = std::max(w, c.max_abs_diff);
  return w;
}

std::string EquivalenceReport::summary() const {
  std::size_t label_ok = 0, within = 0;
  for (const auto& c : per_input) {
    label_ok += c.labels_match;
    within += c.max_abs_diff <= tolerance;
  }
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << ": " << per_input.size() << " inputs, labels match " << label_ok << "/"
     << per_input.size() << ", within tol " << within << "/" << per_input.size() << ", max |diff| " << worst_diff()
     << " (tol " << tolerance << ")";
  return os.str();
}

EquivalenceReport compare(const ModelSpec& a, const ModelSpec& b, const std::vector<Tensor>& inputs, double tol) {
  if (a.input_shape != b.input_shape)
    fail(ErrorCode::ShapeMismatch, "input shapes differ: " + shape_str(a.input_shape) + " vs " + shape_str(b.input_shape));
  EquivalenceReport report;
  report.tolerance = tol;
  report.pass = true;
  for (const auto& x : inputs) {
    Tensor ya = forward(a, x), yb = forward(b, x);
    InputComparison c;
    if (ya.numel() != yb.numel()) {
      c.labels_match = false;
      c.max_abs_diff = INFINITY;
    } else {
      auto argmax = [](const Tensor& t) {
        return std::max_element(t.data().begin(), t.data().end()) - t.data().begin();
      };
      c.labels_match = argmax(ya) == argmax(yb);
      for (std::int64_t i = 0; i < ya.numel(); ++i) {
        double d = std::fabs(static_cast<double>(ya[static_cast<std::size_t>(i)]) - yb[static_cast<std::size_t>(i)]);
        if (std::isnan(d)) d = INFINITY;
        c.max_abs_diff = std::max(c.max_abs_diff, d);
      }
    }
    report.pass = report.pass && c.labels_match && c.max_abs_diff <= tol;
    report.per_input.push_back(c);
  }
  return report;
}

}  // namespace nnd
