// Copyright 2026 The nndecomp Authors
// SPDX-License-Identifier: Apache-2.0

#include "nndecomp/symexpr.hpp"

#include <bit>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace nnd {

namespace {

std::size_t mix(std::size_t h, std::size_t v) { return h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)); }

SymExpr finish(SymNode n) {
  std::size_t h = static_cast<std::size_t>(n.op) + 1;
  h = mix(h, std::hash<std::uint64_t>{}(n.address));
  h = mix(h, n.width);
  h = mix(h, std::hash<std::uint64_t>{}(std::bit_cast<std::uint64_t>(n.value)));
  for (const auto& k : n.kids) h = mix(h, k->hash);
  n.hash = h;
  return std::make_shared<const SymNode>(std::move(n));
}

bool is_const(const SymExpr& e, double v) { return e->op == SymOp::Const && e->value == v; }

bool nary(SymOp op) { return op == SymOp::Add || op == SymOp::Mul || op == SymOp::Max || op == SymOp::Min; }

}  // namespace

namespace sym {

SymExpr cell(std::uint64_t address, std::uint32_t width) {
  SymNode n;
  n.op = SymOp::MemCell;
  n.address = address;
  n.width = width;
  return finish(std::move(n));
}

SymExpr constant(double value) {
  SymNode n;
  n.op = SymOp::Const;
  n.value = value;
  return finish(std::move(n));
}

SymExpr make(SymOp op, std::vector<SymExpr> kids) {
  SymNode n;
  n.op = op;
  n.kids = std::move(kids);
  return finish(std::move(n));
}

}  // namespace sym

bool structurally_equal(const SymExpr& a, const SymExpr& b) {
  if (a == b) return true;
  if (a->hash != b->hash || a->op != b->op || a->kids.size() != b->kids.size()) return false;
  if (a->address != b->address || a->width != b->width || std::bit_cast<std::uint64_t>(a->value) != std::bit_cast<std::uint64_t>(b->value))
    return false;
  for (std::size_t i = 0; i < a->kids.size(); ++i)
    if (!structurally_equal(a->kids[i], b->kids[i])) return false;
  return true;
}

namespace {

class Simplifier {
 public:
  SymExpr run(const SymExpr& e) {
    auto it = memo_.find(e.get());
    if (it != memo_.end()) return it->second;
    SymExpr r = step(e);
    memo_.emplace(e.get(), r);
    keep_.push_back(e);
    return r;
  }

 private:
  SymExpr step(const SymExpr& e) {
    if (e->kids.empty()) return e;
    std::vector<SymExpr> kids;
    kids.reserve(e->kids.size());
    for (const auto& k : e->kids) kids.push_back(run(k));

    switch (e->op) {
      case SymOp::Add: {
        std::vector<SymExpr> flat;
        for (const auto& k : kids) {
          if (k->op == SymOp::Add)
            flat.insert(flat.end(), k->kids.begin(), k->kids.end());
          else if (!is_const(k, 0.0))
            flat.push_back(k);
        }
        if (flat.empty()) return sym::constant(0.0);
        if (flat.size() == 1) return flat.front();
        return sym::make(SymOp::Add, std::move(flat));
      }
      case SymOp::Mul: {
        std::vector<SymExpr> flat;
        for (const auto& k : kids) {
          if (is_const(k, 0.0)) return sym::constant(0.0);
          if (k->op == SymOp::Mul)
            flat.insert(flat.end(), k->kids.begin(), k->kids.end());
          else if (!is_const(k, 1.0))
            flat.push_back(k);
        }
        if (flat.empty()) return sym::constant(1.0);
        if (flat.size() == 1) return flat.front();
        return sym::make(SymOp::Mul, std::move(flat));
      }
      case SymOp::Max:
      case SymOp::Min: {
        std::vector<SymExpr> flat;
        auto push = [&](const SymExpr& x) {
          for (const auto& f : flat)
            if (structurally_equal(f, x)) return;
          flat.push_back(x);
        };
        for (const auto& k : kids) {
          if (k->op == e->op)
            for (const auto& kk : k->kids) push(kk);
          else
            push(k);
        }
        if (flat.size() == 1) return flat.front();
        return sym::make(e->op, std::move(flat));
      }
      case SymOp::Sub:
        if (is_const(kids[1], 0.0)) return kids[0];
        if (is_const(kids[0], 0.0)) return run(sym::neg(kids[1]));
        break;
      case SymOp::Div:
        if (is_const(kids[1], 1.0)) return kids[0];
        break;
      case SymOp::Neg:
        if (kids[0]->op == SymOp::Neg) return kids[0]->kids[0];
        break;
      default: break;
    }
    bool same = true;
    for (std::size_t i = 0; i < kids.size(); ++i) same = same && kids[i] == e->kids[i];
    return same ? e : sym::make(e->op, std::move(kids));
  }

  std::unordered_map<const SymNode*, SymExpr> memo_;
  std::vector<SymExpr> keep_;  // pins memo keys
};

}  // namespace

SymExpr simplify(const SymExpr& e) { return Simplifier{}.run(e); }

float evaluate(const SymExpr& root, const LeafValue& leaf) {
  std::unordered_map<const SymNode*, float> memo;
  std::function<float(const SymExpr&)> ev = [&](const SymExpr& e) -> float {
    auto it = memo.find(e.get());
    if (it != memo.end()) return it->second;
    float r = 0.0f;
    switch (e->op) {
      case SymOp::MemCell: r = leaf(e->address, e->width); break;
      case SymOp::Const: r = static_cast<float>(e->value); break;
      case SymOp::Add:
        r = ev(e->kids[0]);
        for (std::size_t i = 1; i < e->kids.size(); ++i) r += ev(e->kids[i]);
        break;
      case SymOp::Mul:
        r = ev(e->kids[0]);
        for (std::size_t i = 1; i < e->kids.size(); ++i) r *= ev(e->kids[i]);
        break;
      case SymOp::Max:
        r = ev(e->kids[0]);
        for (std::size_t i = 1; i < e->kids.size(); ++i) {
          float v = ev(e->kids[i]);
          r = r > v ? r : v;
        }
        break;
      case SymOp::Min:
        r = ev(e->kids[0]);
        for (std::size_t i = 1; i < e->kids.size(); ++i) {
          float v = ev(e->kids[i]);
          r = r < v ? r : v;
        }
        break;
      case SymOp::Sub: r = ev(e->kids[0]) - ev(e->kids[1]); break;
      case SymOp::Div: r = ev(e->kids[0]) / ev(e->kids[1]); break;
      case SymOp::Sqrt: r = std::sqrt(ev(e->kids[0])); break;
      case SymOp::Neg: r = -ev(e->kids[0]); break;
      case SymOp::Exp: r = std::exp(ev(e->kids[0])); break;
    }
    memo.emplace(e.get(), r);
    return r;
  };
  return ev(root);
}

std::vector<MemRef> cells(const SymExpr& root) {
  std::vector<MemRef> out;
  std::unordered_set<std::uint64_t> seen_cells;
  std::unordered_set<const SymNode*> seen_nodes;
  std::function<void(const SymExpr&)> walk = [&](const SymExpr& e) {
    if (!seen_nodes.insert(e.get()).second) return;
    if (e->op == SymOp::MemCell) {
      if (seen_cells.insert(e->address).second) out.push_back({e->address, e->width});
      return;
    }
    for (const auto& k : e->kids) walk(k);
  };
  walk(root);
  return out;
}

std::size_t count_op(const SymExpr& root, SymOp op) {
  std::unordered_map<const SymNode*, std::size_t> memo;
  std::function<std::size_t(const SymExpr&)> walk = [&](const SymExpr& e) -> std::size_t {
    auto it = memo.find(e.get());
    if (it != memo.end()) return it->second;
    std::size_t n = e->op == op ? 1 : 0;
    for (const auto& k : e->kids) n += walk(k);
    memo.emplace(e.get(), n);
    return n;
  };
  return walk(root);
}

bool contains_op(const SymExpr& e, SymOp op) { return count_op(e, op) > 0; }

std::vector<double> constants(const SymExpr& root) {
  std::vector<double> out;
  std::unordered_set<const SymNode*> seen;
  std::function<void(const SymExpr&)> walk = [&](const SymExpr& e) {
    if (!seen.insert(e.get()).second) return;
    if (e->op == SymOp::Const) out.push_back(e->value);
    for (const auto& k : e->kids) walk(k);
  };
  walk(root);
  return out;
}

std::vector<SymExpr> terms(const SymExpr& e, SymOp op) {
  if (e->op == op && nary(op)) return e->kids;
  return {e};
}

namespace {

int precedence(SymOp op) {
  switch (op) {
    case SymOp::Add:
    case SymOp::Sub: return 1;
    case SymOp::Mul:
    case SymOp::Div: return 2;
    case SymOp::Neg: return 3;
    default: return 4;
  }
}

void render(std::ostream& os, const SymExpr& e, const CellNamer& namer, int parent_prec) {
  const int prec = precedence(e->op);
  const bool paren = prec < parent_prec;
  if (paren) os << '(';
  auto join = [&](const char* sep, int child_prec) {
    for (std::size_t i = 0; i < e->kids.size(); ++i) {
      if (i) os << sep;
      render(os, e->kids[i], namer, i == 0 ? prec : child_prec);
    }
  };
  auto call = [&](const char* name) {
    os << name << '(';
    for (std::size_t i = 0; i < e->kids.size(); ++i) {
      if (i) os << ", ";
      render(os, e->kids[i], namer, 0);
    }
    os << ')';
  };
  switch (e->op) {
    case SymOp::MemCell:
      if (namer)
        os << namer(e->address, e->width);
      else
        os << "mem[0x" << std::hex << e->address << std::dec << "]";
      break;
    case SymOp::Const: {
      std::ostringstream v;
      v << std::setprecision(9) << e->value;
      os << v.str();
      break;
    }
    case SymOp::Add: join(" + ", prec); break;
    case SymOp::Mul: join(" * ", prec); break;
    case SymOp::Sub: join(" - ", prec + 1); break;
    case SymOp::Div: join(" / ", prec + 1); break;
    case SymOp::Neg:
      os << '-';
      render(os, e->kids[0], namer, prec + 1);
      break;
    case SymOp::Max: call("max"); break;
    case SymOp::Min: call("min"); break;
    case SymOp::Sqrt: call("sqrt"); break;
    case SymOp::Exp: call("exp"); break;
  }
  if (paren) os << ')';
}

}  // namespace

std::string to_string(const SymExpr& e, const CellNamer& namer) {
  std::ostringstream os;
  render(os, e, namer, 0);
  return os.str();
}

}  // namespace nnd
