// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Lowering of a ModelSpec into backend kernels: operator fusion, batch norm
// folding or decomposition, padding and im2col rewrites, weight layouts.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "harness_internal.hpp"
#include "nndecomp/error.hpp"

namespace nnd::harness {

namespace {

class Lowerer {
 public:
  Lowerer(const ModelSpec& spec, const CodegenStyle& cs, std::uint64_t seed, const HarnessOptions& opt)
      : spec_(spec), shapes_(infer_shapes(spec)), rng_(seed ^ 0x9e3779b97f4a7c15ull) {
    prog_.style = cs;
    prog_.options = opt;
    for (const auto& op : spec.ops)
      for (const auto& s : op.inputs)
        if (s.kind == Source::Kind::Op) ++uses_[s.name];
    input_ = tensor("input", spec.input_shape, false);
  }

  Program run() {
    for (const auto& op : spec_.ops) {
      if (done_.count(op.id)) continue;
      lower(op);
    }
    return std::move(prog_);
  }

 private:
  Style st() const { return prog_.style.style; }
  bool tvm() const { return st() != Style::Glow; }
  bool fusion() const { return prog_.style.fusion; }

  int tensor(std::string name, Shape shape, bool param, Tensor value = {}, std::vector<float> stored = {}) {
    HTensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.param = param;
    t.value = std::move(value);
    t.stored = std::move(stored);
    prog_.tensors.push_back(std::move(t));
    return static_cast<int>(prog_.tensors.size()) - 1;
  }
  int derived(const std::string& name, Tensor value) {
    auto stored = value.values();
    Shape s = value.shape();
    return tensor(name, std::move(s), true, std::move(value), std::move(stored));
  }
  int param(const std::string& name) {
    auto it = params_.find(name);
    if (it != params_.end()) return it->second;
    int t = derived(name, spec_.params.at(name));
    params_[name] = t;
    return t;
  }
  int act(const std::string& id) {
    auto it = acts_.find(id);
    if (it != acts_.end()) return it->second;
    int t = tensor(id, shapes_.at(id), false);
    acts_[id] = t;
    return t;
  }
  int src(const Source& s) {
    switch (s.kind) {
      case Source::Kind::ModelInput: return input_;
      case Source::Kind::Param: return param(s.name);
      case Source::Kind::Op: return acts_.at(s.name);
    }
    return -1;
  }
  /// The only consumer of `id` when it reads `id` as its first input.
  const OpSpec* sole(const std::string& id) const {
    auto it = uses_.find(id);
    if (it == uses_.end() || it->second != 1) return nullptr;
    for (const auto& op : spec_.ops)
      if (!op.inputs.empty() && op.inputs[0] == Source::op(id)) return &op;
    return nullptr;
  }
  /// True when `s` is an intermediate result read only once.
  bool single_use(const Source& s) const {
    if (s.kind != Source::Kind::Op) return false;
    auto it = uses_.find(s.name);
    return it != uses_.end() && it->second == 1;
  }

  std::size_t push(KKind kk, std::vector<OpKind> kinds, std::vector<std::string> srcs) {
    Kernel k;
    k.kk = kk;
    if (!kinds.empty()) {
      k.anchor = kinds.front();
      k.labels = fused_order(kinds);
    }
    k.source_ops = std::move(srcs);
    prog_.kernels.push_back(std::move(k));
    return prog_.kernels.size() - 1;
  }
  Kernel& K(std::size_t i) { return prog_.kernels[i]; }

  void signature(Kernel& k, std::size_t arity) { k.sig = SignatureConfig::builtin().lookup(st(), k.anchor, arity); }

  LayoutOpt choose_layout(std::int64_t ic, std::int64_t oc) {
    const LayoutOpt& want = prog_.style.layout;
    switch (want.kind) {
      case LayoutOpt::Kind::None: return LayoutOpt::none();
      case LayoutOpt::Kind::Glow5d: return oc % want.A == 0 ? want : LayoutOpt::none();
      case LayoutOpt::Kind::Tvm6d: {
        if (want.A > 0 && want.B > 0) return ic % want.A == 0 && oc % want.B == 0 ? want : LayoutOpt::none();
        std::vector<int> as, bs;
        for (int v : {8, 16, 32}) {
          if (ic % v == 0) as.push_back(v);
          if (oc % v == 0) bs.push_back(v);
        }
        if (as.empty() || bs.empty()) return LayoutOpt::none();
        int a = as[rng_() % as.size()];
        int b = bs[rng_() % bs.size()];
        return LayoutOpt::tvm6d(a, b);
      }
    }
    return LayoutOpt::none();
  }

  void fold_batchnorm(Tensor& w, std::optional<Tensor>& b, const OpSpec& bn) {
    const Tensor& g = spec_.param(bn, "gamma");
    const Tensor& beta = spec_.param(bn, "beta");
    const Tensor& mean = spec_.param(bn, "mean");
    const Tensor& var = spec_.param(bn, "var");
    const double eps = bn.attr_or("eps", 1e-5);
    const auto OC = w.shape()[0];
    const auto per = w.numel() / OC;
    Tensor nb({OC});
    for (std::int64_t oc = 0; oc < OC; ++oc) {
      const auto c = static_cast<std::size_t>(oc);
      const double scale = g[c] / std::sqrt(static_cast<double>(var[c]) + eps);
      for (std::int64_t i = 0; i < per; ++i) {
        auto& v = w[static_cast<std::size_t>(oc * per + i)];
        v = static_cast<float>(v * scale);
      }
      const double b0 = b ? (*b)[c] : 0.0;
      nb[c] = static_cast<float>((b0 - mean[c]) * scale + beta[c]);
    }
    b = std::move(nb);
  }

  void lower(const OpSpec& op) {
    switch (op.kind) {
      case OpKind::Conv:
      case OpKind::Dense: return linear(op);
      case OpKind::BatchNorm: return batchnorm(op);
      case OpKind::BiasAdd: {
        auto i = push(KKind::BiasAdd, {OpKind::BiasAdd}, {op.id});
        K(i).in = src(op.inputs[0]);
        K(i).bias = param(op.params.at("bias"));
        K(i).out = act(op.id);
        signature(K(i), 3);
        return;
      }
      case OpKind::Add:
      case OpKind::Multiply:
      case OpKind::Divide: return binary(op);
      case OpKind::ReLU:
      case OpKind::Sqrt:
      case OpKind::Negative: return unary(op);
      case OpKind::MaxPool:
      case OpKind::AvgPool:
      case OpKind::LRN:
      case OpKind::Softmax:
      case OpKind::Flatten: {
        if (op.kind == OpKind::LRN && op.attr_or("beta", 0.75) != 0.75)
          fail(ErrorCode::UnsupportedOperator, "LRN with beta other than 0.75 in op " + op.id);
        KKind kk = op.kind == OpKind::LRN       ? KKind::LRN
                   : op.kind == OpKind::Softmax ? KKind::Softmax
                   : op.kind == OpKind::Flatten ? KKind::Copy
                                                : KKind::Pool;
        auto i = push(kk, {op.kind}, {op.id});
        K(i).elem = op.kind;
        K(i).op = op;
        K(i).in = src(op.inputs[0]);
        K(i).out = act(op.id);
        signature(K(i), 2);
        return;
      }
      case OpKind::Embedding: {
        auto i = push(KKind::Embedding, {OpKind::Embedding}, {op.id});
        K(i).op = op;
        K(i).in = src(op.inputs[0]);
        K(i).weights = param(op.params.at("weights"));
        K(i).out = act(op.id);
        signature(K(i), 3);
        return;
      }
      case OpKind::Concat: {
        auto i = push(KKind::Concat, {OpKind::Concat}, {op.id});
        K(i).in = src(op.inputs[0]);
        K(i).in2 = src(op.inputs[1]);
        K(i).out = act(op.id);
        signature(K(i), 3);
        return;
      }
      case OpKind::Split: {
        auto i = push(KKind::Split, {OpKind::Split}, {op.id});
        K(i).op = op;
        K(i).in = src(op.inputs[0]);
        K(i).out = act(op.id);
        const Shape& s = prog_.tensors[static_cast<std::size_t>(K(i).in)].shape;
        std::int64_t inner = 1;
        for (std::size_t d = 2; d < s.size(); ++d) inner *= s[d];
        K(i).offset = op.iattr("offset") * inner;
        signature(K(i), 3);
        return;
      }
      default: fail(ErrorCode::UnsupportedOperator, "harness cannot lower " + std::string(kind_name(op.kind)));
    }
  }

  void linear(const OpSpec& op) {
    const bool is_conv = op.kind == OpKind::Conv;
    std::vector<std::string> srcs{op.id};
    std::vector<OpKind> kinds{op.kind};
    Tensor w = spec_.param(op, "weights");
    std::optional<Tensor> b;
    if (op.has_param("bias")) b = spec_.param(op, "bias");
    std::string out_id = op.id;
    bool relu = false;
    auto absorb = [&](const OpSpec* c) {
      srcs.push_back(c->id);
      done_.insert(c->id);
      out_id = c->id;
    };
    if (fusion()) {
      if (const OpSpec* c = sole(out_id); is_conv && c && c->kind == OpKind::BatchNorm) {
        fold_batchnorm(w, b, *c);
        absorb(c);
      }
      if (const OpSpec* c = sole(out_id); c && c->kind == OpKind::BiasAdd && !b) {
        b = spec_.param(*c, "bias");
        absorb(c);
      }
      if (const OpSpec* c = sole(out_id); c && c->kind == OpKind::ReLU && (tvm() || is_conv)) {
        relu = true;
        absorb(c);
      }
    }
    if (st() == Style::Glow && is_conv && !b) b = Tensor({op.iattr("O_C")});
    // Unfused TVM code keeps the bias in a separate kernel.
    const bool split_bias = tvm() && !fusion() && b.has_value();
    if (b && !split_bias) kinds.push_back(OpKind::BiasAdd);
    if (relu) kinds.push_back(OpKind::ReLU);

    int in = src(op.inputs[0]);
    const int out = split_bias ? tensor(op.id + ".raw", shapes_.at(op.id), false) : act(out_id);
    const int bias = b && !split_bias ? derived(out_id + ".bias", *b) : -1;
    OpSpec attrs = op;
    attrs.params.clear();

    if (is_conv) {
      const auto K_ = op.iattr("K"), P = op.iattr("P"), IC = op.iattr("I_C");
      const auto H = shapes_of(in)[2];
      if (st() == Style::Glow && P > 0) {
        const std::int64_t Hp = H + 2 * P;
        const int wide = tensor(op.id + ".pad", {1, IC, Hp, Hp}, false);
        auto m = push(KKind::Memset, {}, {op.id});
        K(m).out = wide;
        K(m).sig = {RoleSet{Role::Out}, RoleSet{Role::Dims}, RoleSet{Role::Dims}};
        K(m).dims = {0, static_cast<std::uint64_t>(IC * Hp * Hp * 4)};
        auto t = push(KKind::InsertTensor, {OpKind::InsertTensor}, {op.id});
        K(t).in = wide;
        K(t).in2 = in;
        K(t).out = wide;
        K(t).offset = P * Hp + P;
        signature(K(t), 3);
        in = wide;
        attrs.attrs["P"] = 0;
      }
      if (tvm() && prog_.options.reshape_conv) {
        const std::int64_t OH = *window_out(H, K_, op.iattr("S"), P), n = IC * K_ * K_;
        const int cols = tensor(op.id + ".cols", {OH * OH, n}, false);
        auto r = push(KKind::Im2col, {OpKind::Reshape}, {op.id});
        K(r).op = attrs;
        K(r).in = in;
        K(r).out = cols;
        signature(K(r), 2);
        auto c = push(KKind::ConvCols, kinds, srcs);
        K(c).op = attrs;
        K(c).in = cols;
        K(c).weights = derived(op.id + ".weights", w);
        K(c).bias = bias;
        K(c).relu = relu;
        K(c).out = out;
        signature(K(c), bias >= 0 ? 4 : 3);
      } else {
        auto c = push(KKind::Conv, kinds, srcs);
        const LayoutOpt layout = choose_layout(IC, op.iattr("O_C"));
        std::vector<float> stored(static_cast<std::size_t>(w.numel()));
        const auto OC = op.iattr("O_C");
        for (std::int64_t oc = 0; oc < OC; ++oc)
          for (std::int64_t ic = 0; ic < IC; ++ic)
            for (std::int64_t ky = 0; ky < K_; ++ky)
              for (std::int64_t kx = 0; kx < K_; ++kx)
                stored[layout_index(layout, oc, ic, ky, kx, IC, K_)] =
                    w[static_cast<std::size_t>(((oc * IC + ic) * K_ + ky) * K_ + kx)];
        K(c).weights = tensor(op.id + ".weights", w.shape(), true, w, std::move(stored));
        K(c).layout = layout;
        K(c).op = attrs;
        K(c).in = in;
        K(c).bias = bias;
        K(c).relu = relu;
        K(c).out = out;
        signature(K(c), bias >= 0 ? 4 : 3);
      }
    } else {
      auto d = push(KKind::Dense, kinds, srcs);
      K(d).op = attrs;
      K(d).in = in;
      K(d).weights = derived(op.id + ".weights", w);
      K(d).bias = bias;
      K(d).relu = relu;
      K(d).out = out;
      signature(K(d), bias >= 0 ? 4 : 3);
    }
    if (split_bias) {
      auto i = push(KKind::BiasAdd, {OpKind::BiasAdd}, {op.id});
      K(i).in = out;
      K(i).bias = derived(op.id + ".bias", *b);
      K(i).out = act(op.id);
      signature(K(i), 3);
    }
  }

  const Shape& shapes_of(int t) const { return prog_.tensors[static_cast<std::size_t>(t)].shape; }

  std::size_t binary_kernel(OpKind kind, int a, int b, int out, std::vector<std::string> srcs) {
    auto i = push(KKind::Binary, {kind}, std::move(srcs));
    K(i).elem = kind;
    K(i).op.kind = kind;
    K(i).in = a;
    K(i).in2 = b;
    K(i).out = out;
    signature(K(i), 3);
    return i;
  }
  std::size_t unary_kernel(KKind kk, OpKind kind, int a, int out, std::vector<std::string> srcs) {
    auto i = push(kk, {kind}, std::move(srcs));
    K(i).elem = kind;
    K(i).op.kind = kind;
    K(i).in = a;
    K(i).out = out;
    signature(K(i), 2);
    return i;
  }

  void binary(const OpSpec& op) {
    std::vector<std::string> srcs{op.id};
    std::vector<OpKind> kinds{op.kind};
    std::string out_id = op.id;
    bool relu = false;
    if (fusion() && st() == Style::TvmO3 && op.kind == OpKind::Add)
      if (const OpSpec* c = sole(op.id); c && c->kind == OpKind::ReLU) {
        relu = true;
        kinds.push_back(OpKind::ReLU);
        srcs.push_back(c->id);
        done_.insert(c->id);
        out_id = c->id;
      }
    const int a = src(op.inputs[0]), b = src(op.inputs[1]);
    auto i = push(KKind::Binary, kinds, srcs);
    K(i).elem = op.kind;
    K(i).op.kind = op.kind;
    K(i).in = a;
    K(i).in2 = b;
    K(i).relu = relu;
    if (st() == Style::Glow && op.kind == OpKind::Add && single_use(op.inputs[0]) &&
        shapes_of(a) == shapes_.at(op.id)) {
      K(i).out = alias(out_id, a);
      K(i).in_place = true;
      signature(K(i), 2);
    } else {
      K(i).out = act(out_id);
      signature(K(i), 3);
    }
  }

  void unary(const OpSpec& op) {
    const int a = src(op.inputs[0]);
    auto i = push(KKind::Unary, {op.kind}, {op.id});
    K(i).elem = op.kind;
    K(i).op.kind = op.kind;
    K(i).in = a;
    if (st() == Style::Glow && op.kind == OpKind::ReLU && single_use(op.inputs[0])) {
      K(i).out = alias(op.id, a);
      K(i).in_place = true;
      signature(K(i), 1);
    } else {
      K(i).out = act(op.id);
      signature(K(i), 2);
    }
  }

  int alias(const std::string& id, int of) {
    int t = act(id);
    prog_.tensors[static_cast<std::size_t>(t)].alias_of = of;
    return t;
  }

  void batchnorm(const OpSpec& op) {
    if (st() != Style::TvmO0)
      fail(ErrorCode::UnsupportedOperator, "batch norm " + op.id + " does not follow a foldable convolution");
    const int x = src(op.inputs[0]);
    const int gamma = param(op.params.at("gamma")), beta = param(op.params.at("beta"));
    const int mean = param(op.params.at("mean")), var = param(op.params.at("var"));
    const int eps = derived(op.id + ".eps", Tensor({1}, {static_cast<float>(op.attr_or("eps", 1e-5))}));
    const int one = derived(op.id + ".one", Tensor({1}, {1.0f}));
    const Shape c = shapes_of(gamma);
    const Shape ce = {1, c[0], 1, 1};
    const Shape xs = shapes_of(x);
    auto tmp = [&](const std::string& suffix, const Shape& s) { return tensor(op.id + "." + suffix, s, false); };
    const std::vector<std::string> srcs{op.id};
    const int t1 = tmp("var_eps", c);
    binary_kernel(OpKind::Add, var, eps, t1, srcs);
    const int t2 = tmp("std", c);
    unary_kernel(KKind::Unary, OpKind::Sqrt, t1, t2, srcs);
    const int t3 = tmp("inv_std", c);
    binary_kernel(OpKind::Divide, one, t2, t3, srcs);
    const int scale = tmp("scale", c);
    binary_kernel(OpKind::Multiply, t3, gamma, scale, srcs);
    const int scale_e = tmp("scale_e", ce);
    unary_kernel(KKind::Copy, OpKind::ExpandDims, scale, scale_e, srcs);
    const int xs_t = tmp("scaled", xs);
    binary_kernel(OpKind::Multiply, x, scale_e, xs_t, srcs);
    const int nm = tmp("neg_mean", c);
    unary_kernel(KKind::Unary, OpKind::Negative, mean, nm, srcs);
    const int ns = tmp("neg_mean_scaled", c);
    binary_kernel(OpKind::Multiply, nm, scale, ns, srcs);
    const int shift = tmp("shift", c);
    binary_kernel(OpKind::Add, ns, beta, shift, srcs);
    const int shift_e = tmp("shift_e", ce);
    unary_kernel(KKind::Copy, OpKind::ExpandDims, shift, shift_e, srcs);
    binary_kernel(OpKind::Add, xs_t, shift_e, act(op.id), srcs);
  }

  const ModelSpec& spec_;
  std::map<std::string, Shape> shapes_;
  std::mt19937_64 rng_;
  Program prog_;
  std::map<std::string, int> uses_;
  std::map<std::string, int> acts_;
  std::map<std::string, int> params_;
  std::set<std::string> done_;
  int input_ = 0;
};

}  // namespace

Program lower(const ModelSpec& spec, const CodegenStyle& style, std::uint64_t seed, const HarnessOptions& options) {
  if (options.reshape_conv && style.style == Style::Glow)
    fail(ErrorCode::InvalidArgument, "reshape_conv applies to TVM styles only");
  return Lowerer(spec, style, seed, options).run();
}

}  // namespace nnd::harness
