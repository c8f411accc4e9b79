// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nndecomp/bundle.hpp"

namespace nnd {

enum class SymOp : std::uint8_t { MemCell, Const, Add, Sub, Mul, Div, Max, Min, Sqrt, Neg, Exp };

struct SymNode;
using SymExpr = std::shared_ptr<const SymNode>;

/// Immutable expression node. Add, Mul, Max and Min are n-ary after
/// simplification; everything else has a fixed arity.
struct SymNode {
  SymOp op = SymOp::Const;
  std::uint64_t address = 0;  // MemCell
  std::uint32_t width = 0;    // MemCell
  double value = 0.0;         // Const
  std::vector<SymExpr> kids;
  std::size_t hash = 0;
};

namespace sym {

SymExpr cell(std::uint64_t address, std::uint32_t width = 4);
SymExpr constant(double value);
SymExpr make(SymOp op, std::vector<SymExpr> kids);
inline SymExpr add(SymExpr a, SymExpr b) { return make(SymOp::Add, {std::move(a), std::move(b)}); }
inline SymExpr sub(SymExpr a, SymExpr b) { return make(SymOp::Sub, {std::move(a), std::move(b)}); }
inline SymExpr mul(SymExpr a, SymExpr b) { return make(SymOp::Mul, {std::move(a), std::move(b)}); }
inline SymExpr div(SymExpr a, SymExpr b) { return make(SymOp::Div, {std::move(a), std::move(b)}); }
inline SymExpr max(SymExpr a, SymExpr b) { return make(SymOp::Max, {std::move(a), std::move(b)}); }
inline SymExpr min(SymExpr a, SymExpr b) { return make(SymOp::Min, {std::move(a), std::move(b)}); }
inline SymExpr sqrt(SymExpr a) { return make(SymOp::Sqrt, {std::move(a)}); }
inline SymExpr neg(SymExpr a) { return make(SymOp::Neg, {std::move(a)}); }
inline SymExpr exp(SymExpr a) { return make(SymOp::Exp, {std::move(a)}); }

}  // namespace sym

bool structurally_equal(const SymExpr& a, const SymExpr& b);

/// Normal form: n-ary sums/products/maxima flattened, additive and
/// multiplicative identities removed, x*0 folded, 0-x rewritten as -x and
/// duplicate Max operands dropped. Evaluation is preserved up to rounding.
SymExpr simplify(const SymExpr& e);

using LeafValue = std::function<float(std::uint64_t address, std::uint32_t width)>;

/// Single-precision evaluation, operands combined left to right.
float evaluate(const SymExpr& e, const LeafValue& leaf);

/// Distinct memory cells in first-use (left-to-right) order.
std::vector<MemRef> cells(const SymExpr& e);

/// Occurrences of `op` counting shared subtrees once per use.
std::size_t count_op(const SymExpr& e, SymOp op);
bool contains_op(const SymExpr& e, SymOp op);

/// All constants in first-use order.
std::vector<double> constants(const SymExpr& e);

/// Operands of a top-level n-ary node of kind `op`, or {e} otherwise.
std::vector<SymExpr> terms(const SymExpr& e, SymOp op);

using CellNamer = std::function<std::string(std::uint64_t address, std::uint32_t width)>;

/// Human-readable infix rendering.
std::string to_string(const SymExpr& e, const CellNamer& namer = {});

}  // namespace nnd
