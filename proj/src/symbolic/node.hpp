#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fblc/symbolic/expr.hpp"

namespace fblc::symbolic {

struct Node {
  ExprKind kind = ExprKind::kConstant;
  bool canonical = false;
  double value = 0.0;
  std::string name;
  std::vector<Expr> args;
  Rational exponent;
  Function fn = Function::kSin;
  std::size_t hash = 0;
  std::uint64_t mask = 0;
};

struct NodeFactory {
  static Expr make(Node node);
  static Expr make_compound(ExprKind kind, std::vector<Expr> args, bool canonical);
  static Expr make_power(const Expr& base, Rational exponent, bool canonical);
  static Expr make_function(Function fn, const Expr& arg, bool canonical);
};

std::uint64_t variable_bit(const std::string& name);

}  // namespace fblc::symbolic
