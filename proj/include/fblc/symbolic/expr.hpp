#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fblc/symbolic/rational.hpp"

namespace fblc::symbolic {

enum class ExprKind : std::uint8_t {
  kConstant,
  kVariable,
  kSum,
  kProduct,
  kPower,
  kQuotient,
  kFunction,
};

enum class Function : std::uint8_t { kSin, kCos, kExp, kLog, kSqrt, kTanh };

const char* function_name(Function fn);

struct Node;

// Immutable expression handle. Copies share the underlying tree.
class Expr {
 public:
  Expr();  // the constant 0
  Expr(double value);  // NOLINT: constants convert implicitly

  static Expr constant(double value);
  static Expr variable(const std::string& name);

  // Raw constructors keep the tree exactly as given; used by the parser so
  // that simplification is observable and testable.
  static Expr raw_sum(std::vector<Expr> terms);
  static Expr raw_product(std::vector<Expr> factors);
  static Expr raw_power(const Expr& base, Rational exponent);
  static Expr raw_quotient(const Expr& num, const Expr& den);
  static Expr raw_function(Function fn, const Expr& arg);

  ExprKind kind() const;
  bool is_constant() const;
  bool is_constant(double v) const;
  bool is_zero() const { return is_constant(0.0); }
  bool is_one() const { return is_constant(1.0); }
  bool is_variable() const { return kind() == ExprKind::kVariable; }

  double value() const;               // constant payload
  const std::string& name() const;    // variable payload
  const std::vector<Expr>& args() const;
  const Expr& base() const;           // power base
  Rational exponent() const;          // power exponent
  Function function() const;          // function tag
  const Expr& arg() const;            // function argument

  std::size_t hash() const;
  bool is_canonical() const;
  std::uint64_t variable_mask() const;
  const Node* id() const { return node_.get(); }

  bool depends_on(const std::string& name) const;
  std::set<std::string> free_variables() const;
  std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  friend struct NodeFactory;
  std::shared_ptr<const Node> node_;
};

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return e.hash(); }
};

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const;
};

// Total structural order used to sort sum and product children.
int compare(const Expr& a, const Expr& b);

using Substitution = std::map<std::string, Expr>;

// Canonical builders. Inputs are simplified first; results are canonical.
Expr add(std::vector<Expr> terms);
Expr mul(std::vector<Expr> factors);
Expr pow(const Expr& base, Rational exponent);
Expr apply(Function fn, const Expr& arg);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

Expr sin(const Expr& e);
Expr cos(const Expr& e);
Expr exp(const Expr& e);
Expr log(const Expr& e);
Expr sqrt(const Expr& e);
Expr tanh(const Expr& e);

Expr simplify(const Expr& e);
Expr diff(const Expr& e, const std::string& var);
Expr substitute(const Expr& e, const Substitution& replacements);

// True when simplification reduces e to the literal 0 and probing the
// unsimplified tree at 16 random bindings agrees.
bool is_identically_zero(const Expr& e);

}  // namespace fblc::symbolic
