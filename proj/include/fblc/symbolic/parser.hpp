#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fblc/symbolic/expr.hpp"

namespace fblc::symbolic {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& message, std::size_t position)
      : std::runtime_error(message + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UndeclaredSymbol : public std::runtime_error {
 public:
  UndeclaredSymbol(const std::string& name, std::size_t position)
      : std::runtime_error("undeclared symbol '" + name + "' at position " +
                           std::to_string(position)),
        name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

// Infix grammar: + - * / ^ (right associative), unary minus, calls to
// sin cos exp log sqrt tanh, numeric literals and declared names. The time
// variable t is always accepted. The tree is returned unsimplified.
Expr parse_expr(std::string_view text, const std::vector<std::string>& symbols);

}  // namespace fblc::symbolic
