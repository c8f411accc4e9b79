// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

// Per-style argument conventions of generated operator kernels.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nndecomp/bundle.hpp"
#include "nndecomp/op_kind.hpp"

namespace nnd {

enum class Role : std::uint8_t { In, In1, In2, Weights, Biases, Out, Offset, Dims };

/// One argument may serve several roles (e.g. an in-place "in1/out" buffer).
class RoleSet {
 public:
  RoleSet() = default;
  RoleSet(std::initializer_list<Role> roles) {
    for (Role r : roles) add(r);
  }
  void add(Role r) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(r)); }
  bool has(Role r) const { return (bits_ >> static_cast<unsigned>(r)) & 1u; }
  bool is_input() const { return has(Role::In) || has(Role::In1) || has(Role::In2); }
  bool is_output() const { return has(Role::Out); }
  bool empty() const { return bits_ == 0; }
  std::string str() const;  // "in1/out"
  static RoleSet parse(const std::string& text);
  bool operator==(const RoleSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

using Signature = std::vector<RoleSet>;

const char* role_name(Role r);

/// Maps (style, anchor operator kind) to the argument role lists a kernel of
/// that kind may have; variants are told apart by arity.
class SignatureConfig {
 public:
  /// The built-in tables for the TVM and Glow code generators.
  static const SignatureConfig& builtin();

  void add(Style style, OpKind anchor, Signature roles);
  /// Throws MissingSignature when no variant of that arity exists.
  const Signature& lookup(Style style, OpKind anchor, std::size_t arity) const;
  bool has(Style style, OpKind anchor) const;
  const std::vector<Signature>& variants(Style style, OpKind anchor) const;

 private:
  std::map<std::pair<Style, OpKind>, std::vector<Signature>> table_;
};

/// Index of the first argument carrying `role`, or -1.
int find_role(const Signature& sig, Role role);

}  // namespace nnd
