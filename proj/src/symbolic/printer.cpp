#include <charconv>
#include <cmath>
#include <string>

#include "fblc/symbolic/expr.hpp"

namespace fblc::symbolic {

namespace {

enum Prec { kSum = 1, kProduct = 2, kUnary = 3, kPower = 4, kAtom = 5 };

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool has_negative_sign(const Expr& e) {
  if (e.is_constant()) return e.value() < 0.0 || std::signbit(e.value());
  if (e.kind() == ExprKind::kProduct) {
    const Expr& head = e.args().front();
    return head.is_constant() && head.value() < 0.0;
  }
  return false;
}

bool is_denominator(const Expr& f) {
  return f.kind() == ExprKind::kPower && f.exponent().num() < 0;
}

int precedence(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::kConstant:
      return has_negative_sign(e) ? kUnary : kAtom;
    case ExprKind::kVariable:
    case ExprKind::kFunction:
      return kAtom;
    case ExprKind::kSum:
      return kSum;
    case ExprKind::kProduct:
      return has_negative_sign(e) ? kUnary : kProduct;
    case ExprKind::kQuotient:
      return kProduct;
    case ExprKind::kPower: {
      Rational r = e.exponent();
      if (r.num() < 0) return kProduct;
      if (r == Rational(1, 2)) return kAtom;
      return kPower;
    }
  }
  return kAtom;
}

std::string print(const Expr& e);

std::string print_at(const Expr& e, int min_prec) {
  std::string s = print(e);
  if (precedence(e) < min_prec) return "(" + s + ")";
  return s;
}

std::string print_positive_power(const Expr& base, Rational r) {
  if (r.is_one()) return print_at(base, kPower + 1);
  if (r == Rational(1, 2)) return "sqrt(" + print(base) + ")";
  std::string b = print_at(base, kAtom);
  if (r.is_integer()) return b + "^" + std::to_string(r.num());
  return b + "^(" + r.to_string() + ")";
}

// Product printing with an optional sign flip of the leading coefficient.
std::string print_product(const std::vector<Expr>& factors, bool flip) {
  double coef = 1.0;
  std::size_t start = 0;
  if (!factors.empty() && factors.front().is_constant()) {
    coef = factors.front().value();
    start = 1;
  }
  if (flip) coef = -coef;
  std::vector<std::string> num;
  std::vector<std::string> den;
  std::size_t den_count = 0;
  for (std::size_t i = start; i < factors.size(); ++i) {
    const Expr& f = factors[i];
    if (is_denominator(f)) {
      den.push_back(print_positive_power(f.base(), -f.exponent()));
      ++den_count;
    } else {
      num.push_back(print_at(f, kPower));
    }
  }
  std::string out;
  bool negative = coef < 0.0;
  double mag = std::fabs(coef);
  if (negative) out += "-";
  if (num.empty()) {
    out += number(mag);
  } else {
    if (mag != 1.0) out += number(mag) + "*";
    for (std::size_t i = 0; i < num.size(); ++i) {
      if (i > 0) out += "*";
      out += num[i];
    }
  }
  if (den_count == 0) return out;
  out += "/";
  if (den_count == 1) {
    out += den.front();
  } else {
    out += "(";
    for (std::size_t i = 0; i < den.size(); ++i) {
      if (i > 0) out += "*";
      out += den[i];
    }
    out += ")";
  }
  return out;
}

std::string print_term_abs(const Expr& t) {
  if (t.is_constant()) return number(std::fabs(t.value()));
  if (t.kind() == ExprKind::kProduct) return print_product(t.args(), true);
  return print(t);
}

std::string print(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::kConstant:
      return number(e.value());
    case ExprKind::kVariable:
      return e.name();
    case ExprKind::kFunction:
      return std::string(function_name(e.function())) + "(" + print(e.arg()) + ")";
    case ExprKind::kPower: {
      Rational r = e.exponent();
      if (r.num() < 0) return print_product({e}, false);
      return print_positive_power(e.base(), r);
    }
    case ExprKind::kQuotient:
      return print_at(e.args()[0], kProduct) + "/" + print_at(e.args()[1], kPower);
    case ExprKind::kProduct:
      return print_product(e.args(), false);
    case ExprKind::kSum: {
      std::vector<const Expr*> order;
      const Expr* constant = nullptr;
      for (const auto& t : e.args()) {
        if (t.is_constant() && constant == nullptr && e.is_canonical()) {
          constant = &t;
        } else {
          order.push_back(&t);
        }
      }
      if (constant != nullptr) order.push_back(constant);
      std::string out;
      for (std::size_t i = 0; i < order.size(); ++i) {
        const Expr& t = *order[i];
        bool neg = has_negative_sign(t);
        if (i == 0) {
          out += neg ? "-" + print_term_abs(t) : print_at(t, kSum + 1);
        } else {
          out += neg ? " - " + print_term_abs(t) : " + " + print_at(t, kSum + 1);
        }
      }
      return out;
    }
  }
  return "?";
}

}  // namespace


std::string Expr::to_string() const { return print(*this); }

}  // namespace fblc::symbolic
