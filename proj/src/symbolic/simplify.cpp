#include <cmath>
#include <functional>
#include <random>
#include <unordered_map>

#include "fblc/symbolic/eval.hpp"
#include "fblc/symbolic/expr.hpp"
#include "node.hpp"

namespace fblc::symbolic {

namespace {

using Memo = std::unordered_map<const Node*, Expr>;

Expr simplify_rec(const Expr& e, Memo& memo);

// Raw product and quotient nests are gathered into one factor list so the
// result does not depend on how the source grouped them.
void collect_factors(const Expr& e, bool invert, std::vector<Expr>& out, Memo& memo) {
  if (!e.is_canonical()) {
    if (e.kind() == ExprKind::kProduct) {
      for (const auto& a : e.args()) collect_factors(a, invert, out, memo);
      return;
    }
    if (e.kind() == ExprKind::kQuotient) {
      collect_factors(e.args()[0], invert, out, memo);
      collect_factors(e.args()[1], !invert, out, memo);
      return;
    }
  }
  Expr s = simplify_rec(e, memo);
  out.push_back(invert ? pow(s, Rational(-1)) : s);
}

Expr simplify_rec(const Expr& e, Memo& memo) {
  if (e.is_canonical()) return e;
  auto it = memo.find(e.id());
  if (it != memo.end()) return it->second;
  Expr out;
  switch (e.kind()) {
    case ExprKind::kConstant:
    case ExprKind::kVariable:
      out = e;
      break;
    case ExprKind::kSum: {
      std::vector<Expr> parts;
      for (const auto& a : e.args()) parts.push_back(simplify_rec(a, memo));
      out = add(std::move(parts));
      break;
    }
    case ExprKind::kProduct:
    case ExprKind::kQuotient: {
      std::vector<Expr> parts;
      collect_factors(e, false, parts, memo);
      out = mul(std::move(parts));
      break;
    }
    case ExprKind::kPower:
      out = pow(simplify_rec(e.base(), memo), e.exponent());
      break;
    case ExprKind::kFunction:
      out = apply(e.function(), simplify_rec(e.arg(), memo));
      break;
  }
  memo.emplace(e.id(), out);
  return out;
}

Expr diff_rec(const Expr& e, const std::string& v, std::uint64_t bit, Memo& memo) {
  if ((e.variable_mask() & bit) == 0) return Expr::constant(0.0);
  auto it = memo.find(e.id());
  if (it != memo.end()) return it->second;
  Expr out;
  switch (e.kind()) {
    case ExprKind::kConstant:
      out = Expr::constant(0.0);
      break;
    case ExprKind::kVariable:
      out = Expr::constant(e.name() == v ? 1.0 : 0.0);
      break;
    case ExprKind::kSum: {
      std::vector<Expr> parts;
      for (const auto& a : e.args()) parts.push_back(diff_rec(a, v, bit, memo));
      out = add(std::move(parts));
      break;
    }
    case ExprKind::kProduct: {
      const auto& a = e.args();
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < a.size(); ++i) {
        Expr d = diff_rec(a[i], v, bit, memo);
        if (d.is_zero()) continue;
        std::vector<Expr> f(a.begin(), a.end());
        f[i] = d;
        terms.push_back(mul(std::move(f)));
      }
      out = add(std::move(terms));
      break;
    }
    case ExprKind::kPower: {
      Expr d = diff_rec(e.base(), v, bit, memo);
      Rational r = e.exponent();
      out = mul({Expr::constant(r.to_double()), pow(e.base(), r - Rational(1)), d});
      break;
    }
    case ExprKind::kFunction: {
      const Expr& a = e.arg();
      Expr d = diff_rec(a, v, bit, memo);
      Expr outer;
      switch (e.function()) {
        case Function::kSin: outer = cos(a); break;
        case Function::kCos: outer = -sin(a); break;
        case Function::kExp: outer = e; break;
        case Function::kLog: outer = pow(a, Rational(-1)); break;
        case Function::kTanh: outer = Expr::constant(1.0) - pow(e, Rational(2)); break;
        case Function::kSqrt: outer = mul({Expr::constant(0.5), pow(a, Rational(-1, 2))}); break;
      }
      out = mul({outer, d});
      break;
    }
    case ExprKind::kQuotient:
      out = diff_rec(simplify(e), v, bit, memo);
      break;
  }
  memo.emplace(e.id(), out);
  return out;
}

Expr substitute_rec(const Expr& e, const Substitution& repl, std::uint64_t mask, Memo& memo) {
  if ((e.variable_mask() & mask) == 0) return simplify(e);
  auto it = memo.find(e.id());
  if (it != memo.end()) return it->second;
  Expr out;
  switch (e.kind()) {
    case ExprKind::kConstant:
      out = e;
      break;
    case ExprKind::kVariable: {
      auto r = repl.find(e.name());
      out = r == repl.end() ? e : simplify(r->second);
      break;
    }
    case ExprKind::kSum: {
      std::vector<Expr> parts;
      for (const auto& a : e.args()) parts.push_back(substitute_rec(a, repl, mask, memo));
      out = add(std::move(parts));
      break;
    }
    case ExprKind::kProduct: {
      std::vector<Expr> parts;
      for (const auto& a : e.args()) parts.push_back(substitute_rec(a, repl, mask, memo));
      out = mul(std::move(parts));
      break;
    }
    case ExprKind::kPower:
      out = pow(substitute_rec(e.base(), repl, mask, memo), e.exponent());
      break;
    case ExprKind::kQuotient:
      out = mul({substitute_rec(e.args()[0], repl, mask, memo),
                 pow(substitute_rec(e.args()[1], repl, mask, memo), Rational(-1))});
      break;
    case ExprKind::kFunction:
      out = apply(e.function(), substitute_rec(e.arg(), repl, mask, memo));
      break;
  }
  memo.emplace(e.id(), out);
  return out;
}

}  // namespace

Expr simplify(const Expr& e) {
  if (e.is_canonical()) return e;
  Memo memo;
  return simplify_rec(e, memo);
}

Expr diff(const Expr& e, const std::string& var) {
  Memo memo;
  return diff_rec(simplify(e), var, variable_bit(var), memo);
}

Expr substitute(const Expr& e, const Substitution& replacements) {
  std::uint64_t mask = 0;
  for (const auto& [name, _] : replacements) mask |= variable_bit(name);
  Memo memo;
  return substitute_rec(e, replacements, mask, memo);
}

bool is_identically_zero(const Expr& e) {
  if (!simplify(e).is_zero()) return false;
  auto vars = e.free_variables();
  if (vars.empty()) return true;
  std::mt19937_64 rng(0x2b7e151628aed2a6ULL);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  int accepted = 0;
  for (int attempt = 0; attempt < 256 && accepted < 16; ++attempt) {
    Binding b;
    for (const auto& v : vars) b.set(v, dist(rng));
    double value = 0.0;
    try {
      value = eval(e, b);
    } catch (const DomainError&) {
      continue;
    }
    if (!(std::fabs(value) < 1e-10)) return false;
    ++accepted;
  }
  return true;
}

}  // namespace fblc::symbolic
