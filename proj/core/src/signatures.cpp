// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/signatures.hpp"

#include <sstream>

#include "nndecomp/error.hpp"

namespace nnd {

namespace {

constexpr Role kAllRoles[] = {Role::In, Role::In1, Role::In2, Role::Weights, Role::Biases, Role::Out, Role::Offset, Role::Dims};

SignatureConfig make_builtin() {
  SignatureConfig c;
  const RoleSet in{Role::In}, in1{Role::In1}, in2{Role::In2}, w{Role::Weights}, b{Role::Biases}, out{Role::Out},
      off{Role::Offset}, inout{Role::In, Role::Out}, in1out{Role::In1, Role::Out};

  for (Style s : {Style::TvmO0, Style::TvmO3}) {
    c.add(s, OpKind::Conv, {in, w, out});
    c.add(s, OpKind::Conv, {in, w, b, out});
    c.add(s, OpKind::Dense, {in, w, out});
    c.add(s, OpKind::Dense, {in, w, b, out});
    c.add(s, OpKind::BiasAdd, {in, b, out});
    for (OpKind k : {OpKind::Add, OpKind::Divide, OpKind::Multiply, OpKind::Concat}) c.add(s, k, {in1, in2, out});
    for (OpKind k : {OpKind::ReLU, OpKind::Sqrt, OpKind::Negative, OpKind::Softmax, OpKind::LRN, OpKind::MaxPool,
                     OpKind::AvgPool, OpKind::Reshape, OpKind::Transpose, OpKind::Flatten, OpKind::ExpandDims})
      c.add(s, k, {in, out});
    c.add(s, OpKind::Split, {in, out, off});
    c.add(s, OpKind::Embedding, {in, w, out});
  }

  const Style g = Style::Glow;
  c.add(g, OpKind::Conv, {out, in, w, b});
  c.add(g, OpKind::Dense, {out, in, w});
  c.add(g, OpKind::Dense, {out, in, w, b});
  c.add(g, OpKind::BiasAdd, {out, in, b});
  c.add(g, OpKind::ReLU, {inout});
  c.add(g, OpKind::ReLU, {out, in});
  c.add(g, OpKind::Add, {in1out, in2});
  c.add(g, OpKind::Add, {out, in1, in2});
  for (OpKind k : {OpKind::Multiply, OpKind::Divide, OpKind::Concat}) c.add(g, k, {out, in1, in2});
  for (OpKind k : {OpKind::LRN, OpKind::Softmax, OpKind::Sqrt, OpKind::Negative, OpKind::Reshape, OpKind::Transpose,
                   OpKind::Flatten, OpKind::ExpandDims})
    c.add(g, k, {out, in});
  for (OpKind k : {OpKind::MaxPool, OpKind::AvgPool}) c.add(g, k, {in, out});
  c.add(g, OpKind::InsertTensor, {in1out, in2, off});
  c.add(g, OpKind::Split, {out, in, off});
  c.add(g, OpKind::Embedding, {out, w, in});
  return c;
}

}  // namespace

const char* role_name(Role r) {
  switch (r) {
    case Role::In: return "in";
    case Role::In1: return "in1";
    case Role::In2: return "in2";
    case Role::Weights: return "weights";
    case Role::Biases: return "biases";
    case Role::Out: return "out";
    case Role::Offset: return "offset";
    case Role::Dims: return "dims";
  }
  return "?";
}

std::string RoleSet::str() const {
  std::string s;
  for (Role r : kAllRoles) {
    if (!has(r)) continue;
    if (!s.empty()) s += '/';
    s += role_name(r);
  }
  return s;
}

RoleSet RoleSet::parse(const std::string& text) {
  RoleSet set;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, '/')) {
    bool found = false;
    for (Role r : kAllRoles)
      if (part == role_name(r)) {
        set.add(r);
        found = true;
      }
    if (!found) fail(ErrorCode::SchemaViolation, "unknown argument role '" + part + "'");
  }
  return set;
}

const SignatureConfig& SignatureConfig::builtin() {
  static const SignatureConfig c = make_builtin();
  return c;
}

void SignatureConfig::add(Style style, OpKind anchor, Signature roles) { table_[{style, anchor}].push_back(std::move(roles)); }

bool SignatureConfig::has(Style style, OpKind anchor) const { return table_.count({style, anchor}) != 0; }

const std::vector<Signature>& SignatureConfig::variants(Style style, OpKind anchor) const {
  auto it = table_.find({style, anchor});
  if (it == table_.end())
    fail(ErrorCode::MissingSignature, std::string("no signature for ") + std::string(kind_name(anchor)) + " under " + style_name(style));
  return it->second;
}

const Signature& SignatureConfig::lookup(Style style, OpKind anchor, std::size_t arity) const {
  for (const auto& sig : variants(style, anchor))
    if (sig.size() == arity) return sig;
  fail(ErrorCode::MissingSignature, std::string("no ") + std::to_string(arity) + "-argument signature for " +
                                        std::string(kind_name(anchor)) + " under " + style_name(style));
}

int find_role(const Signature& sig, Role role) {
  for (std::size_t i = 0; i < sig.size(); ++i)
    if (sig[i].has(role)) return static_cast<int>(i);
  return -1;
}

}  // namespace nnd
