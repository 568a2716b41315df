#include "fblc/symbolic/parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>
#include <unordered_set>

#include "fblc/symbolic/eval.hpp"

namespace fblc::symbolic {

namespace {

std::optional<Function> lookup_function(const std::string& name) {
  if (name == "sin") return Function::kSin;
  if (name == "cos") return Function::kCos;
  if (name == "exp") return Function::kExp;
  if (name == "log") return Function::kLog;
  if (name == "sqrt") return Function::kSqrt;
  if (name == "tanh") return Function::kTanh;
  return std::nullopt;
}

std::optional<Rational> as_rational(double c) {
  if (!std::isfinite(c)) return std::nullopt;
  for (std::int64_t den = 1; den <= 64; ++den) {
    double scaled = c * static_cast<double>(den);
    double rounded = std::round(scaled);
    if (std::fabs(rounded) > 1e15) return std::nullopt;
    if (std::fabs(scaled - rounded) <= 1e-12 * std::max(1.0, std::fabs(scaled))) {
      return Rational(static_cast<std::int64_t>(rounded), den);
    }
  }
  return std::nullopt;
}

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& symbols)
      : text_(text), symbols_(symbols.begin(), symbols.end()) {
    symbols_.insert(kTimeVariable);
  }

  Expr parse() {
    skip_space();
    if (at_end()) throw SyntaxError("empty expression", pos_);
    Expr e = expression();
    skip_space();
    if (!at_end()) throw SyntaxError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return e;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip_space();
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr expression() {
    std::vector<Expr> terms{term()};
    for (;;) {
      if (accept('+')) {
        terms.push_back(term());
      } else if (accept('-')) {
        terms.push_back(Expr::raw_product({Expr::constant(-1.0), term()}));
      } else {
        break;
      }
    }
    return Expr::raw_sum(std::move(terms));
  }

  Expr term() {
    Expr acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = Expr::raw_product({acc, unary()});
      } else if (accept('/')) {
        acc = Expr::raw_quotient(acc, unary());
      } else {
        break;
      }
    }
    return acc;
  }

  Expr unary() {
    if (accept('-')) {
      Expr inner = unary();
      if (inner.is_constant()) return Expr::constant(-inner.value());
      return Expr::raw_product({Expr::constant(-1.0), inner});
    }
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (!accept('^')) return base;
    Expr exponent = unary();
    Expr folded = simplify(exponent);
    if (folded.is_constant()) {
      if (auto r = as_rational(folded.value())) return Expr::raw_power(base, *r);
    }
    return Expr::raw_function(Function::kExp,
                              Expr::raw_product({exponent, Expr::raw_function(Function::kLog, base)}));
  }

  Expr primary() {
    skip_space();
    if (at_end()) throw SyntaxError("unexpected end of input", pos_);
    char c = peek();
    if (c == '(') {
      ++pos_;
      Expr inner = expression();
      if (!accept(')')) throw SyntaxError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw SyntaxError(std::string("unexpected '") + c + "'", pos_);
  }

  Expr number() {
    std::size_t start = pos_;
    while (!at_end() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.')) ++pos_;
    if (!at_end() && (peek() == 'e' || peek() == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw SyntaxError("malformed number", start);
    return Expr::constant(v);
  }

  Expr identifier() {
    std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    skip_space();
    if (peek() == '(') {
      auto fn = lookup_function(name);
      if (!fn) throw SyntaxError("unknown function '" + name + "'", start);
      ++pos_;
      Expr arg = expression();
      if (!accept(')')) throw SyntaxError("expected ')'", pos_);
      return Expr::raw_function(*fn, arg);
    }
    if (symbols_.count(name) == 0) throw UndeclaredSymbol(name, start);
    return Expr::variable(name);
  }

  std::string_view text_;
  std::unordered_set<std::string> symbols_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const std::vector<std::string>& symbols) {
  return Parser(text, symbols).parse();
}

}  // namespace fblc::symbolic
