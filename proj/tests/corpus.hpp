#pragma once

// Randomized expression corpus shared by the symbolic unit tests and the
// acceptance binary. Every generated tree is smooth on the sampling box so
// finite differences are a valid oracle.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>

#include "fblc/symbolic/eval.hpp"
#include "fblc/symbolic/expr.hpp"
#include "fblc/symbolic/parser.hpp"

namespace fblc::symbolic::corpus {

struct CorpusStats {
  int cases = 0;
  int failures = 0;
  int diff_checks = 0;
  int value_checks = 0;
  int idempotence_checks = 0;
  int roundtrip_checks = 0;
  std::string first_failure;
};

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  Expr expression(int depth) {
    if (depth == 0 || uniform() < 0.25) return leaf();
    Expr a = expression(depth - 1);
    switch (pick(9)) {
      case 0: {
        std::vector<Expr> terms{a, expression(depth - 1)};
        if (uniform() < 0.4) terms.push_back(expression(depth - 1));
        return Expr::raw_sum(std::move(terms));
      }
      case 1:
        return Expr::raw_product({a, expression(depth - 1)});
      case 2:
        return Expr::raw_sum({a, Expr::raw_product({Expr::constant(-1.0), expression(depth - 1)})});
      case 3:
        return Expr::raw_quotient(a, positive(expression(depth - 1)));
      case 4: {
        // deep power towers are too stiff for a 1e-5 central difference
        if (depth > 1) return Expr::raw_product({a, expression(depth - 1)});
        static const std::int64_t kPowers[] = {2, 3};
        return Expr::raw_power(a, Rational(kPowers[pick(2)]));
      }
      case 5: {
        static const Rational kRoots[] = {Rational(1, 2), Rational(-1, 2), Rational(3, 2), Rational(1, 3),
                                          Rational(-2), Rational(-1)};
        return Expr::raw_power(positive(a), kRoots[pick(6)]);
      }
      case 6: {
        static const Function kFns[] = {Function::kSin, Function::kCos, Function::kTanh};
        return Expr::raw_function(kFns[pick(3)], a);
      }
      case 7:
        return Expr::raw_function(Function::kExp, Expr::raw_function(Function::kSin, a));
      default:
        if (uniform() < 0.5) return Expr::raw_function(Function::kLog, positive(a));
        return Expr::raw_function(Function::kSqrt, positive(a));
    }
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

 private:
  Expr leaf() {
    static const char* kNames[] = {"x1", "x2", "t"};
    if (uniform() < 0.6) return Expr::variable(kNames[pick(3)]);
    if (uniform() < 0.5) return Expr::constant(static_cast<double>(pick(7) - 3));
    return Expr::constant(std::round(uniform(-3.0, 3.0) * 100.0) / 100.0);
  }

  // 1 + a^2 or 2 + cos(a): bounded away from zero.
  Expr positive(const Expr& a) {
    if (uniform() < 0.5) return Expr::raw_sum({Expr::constant(1.0), Expr::raw_power(a, Rational(2))});
    return Expr::raw_sum({Expr::constant(2.0), Expr::raw_function(Function::kCos, a)});
  }

  std::mt19937_64 rng_;
};

inline Expr strip(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::kConstant:
    case ExprKind::kVariable:
      return e;
    case ExprKind::kSum:
    case ExprKind::kProduct: {
      std::vector<Expr> parts;
      for (const auto& a : e.args()) parts.push_back(strip(a));
      return e.kind() == ExprKind::kSum ? Expr::raw_sum(std::move(parts)) : Expr::raw_product(std::move(parts));
    }
    case ExprKind::kPower:
      return Expr::raw_power(strip(e.base()), e.exponent());
    case ExprKind::kQuotient:
      return Expr::raw_quotient(strip(e.args()[0]), strip(e.args()[1]));
    case ExprKind::kFunction:
      return Expr::raw_function(e.function(), strip(e.arg()));
  }
  return e;
}

inline CorpusStats run_corpus(int cases, std::uint64_t seed) {
  static const std::vector<std::string> kSymbols = {"x1", "x2"};
  static const char* kVars[] = {"x1", "x2", "t"};
  Generator gen(seed);
  CorpusStats stats;
  auto fail = [&](const std::string& what, const Expr& e) {
    ++stats.failures;
    if (stats.first_failure.empty()) stats.first_failure = what + ": " + e.to_string();
    if (std::getenv("CORPUS_VERBOSE")) std::fprintf(stderr, "%s: %s\n", what.c_str(), e.to_string().c_str());
  };
  while (stats.cases < cases) {
    Expr e = gen.expression(4);
    Binding b;
    double value = 0.0;
    bool found = false;
    for (int attempt = 0; attempt < 20 && !found; ++attempt) {
      b = Binding(gen.uniform(-1.5, 1.5));
      b.set("x1", gen.uniform(-1.5, 1.5)).set("x2", gen.uniform(-1.5, 1.5));
      try {
        value = eval(e, b);
        found = std::fabs(value) < 1e6;
      } catch (const DomainError&) {
      }
    }
    if (!found) continue;
    ++stats.cases;

    // derivative against central differences
    const double h = 1e-5;
    for (const char* v : kVars) {
      Binding hi = b;
      Binding lo = b;
      double x = *b.lookup(v);
      hi.set(v, x + h);
      lo.set(v, x - h);
      double fd = (eval(e, hi) - eval(e, lo)) / (2.0 * h);
      double d = eval(diff(e, v), b);
      ++stats.diff_checks;
      if (!(std::fabs(d - fd) <= 1e-6 * std::max(1.0, std::fabs(d)))) {
        std::ostringstream msg;
        msg << "diff wrt " << v << " analytic " << d << " fd " << fd;
        fail(msg.str(), e);
      }
    }

    Expr s = simplify(e);
    double sv = eval(s, b);
    ++stats.value_checks;
    if (!(std::fabs(sv - value) < 1e-10 * (1.0 + std::fabs(value)))) fail("simplify changed value", e);

    ++stats.idempotence_checks;
    if (!(simplify(strip(s)) == s)) fail("simplify not idempotent", e);

    ++stats.roundtrip_checks;
    try {
      Expr back = parse_expr(e.to_string(), kSymbols);
      double bv = eval(back, b);
      if (!(std::fabs(bv - value) <= 1e-12 * (1.0 + std::fabs(value)))) fail("printer round trip value", e);
      Expr sback = simplify(parse_expr(s.to_string(), kSymbols));
      if (!(sback == s)) fail("printer round trip structure " + sback.to_string() + " vs", s);
    } catch (const std::exception& ex) {
      fail(std::string("round trip threw ") + ex.what(), e);
    }
  }
  return stats;
}

}  // namespace fblc::symbolic::corpus
