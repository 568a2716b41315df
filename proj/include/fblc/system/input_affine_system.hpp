#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fblc/symbolic/eval.hpp"
#include "fblc/symbolic/expr.hpp"

namespace fblc::system {

using symbolic::Expr;

class SystemError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// x' = f(t,x) + g(t,x) u, y = h(t,x).
struct InputAffineSystem {
  std::vector<std::string> states;
  std::vector<std::string> inputs;
  std::vector<Expr> drift;                    // n
  std::vector<std::vector<Expr>> input_map;   // n rows of m entries
  std::vector<Expr> output;                   // m
  std::vector<double> x0;
  double t0 = 0.0;

  std::size_t state_count() const { return states.size(); }
  std::size_t input_count() const { return inputs.size(); }

  // Throws SystemError on dimension mismatch, duplicate names or free
  // variables outside the states and t.
  void validate() const;

  std::optional<std::size_t> state_index(const std::string& name) const;
  std::vector<Expr> input_column(std::size_t j) const;
  // "t" followed by the state names, the slot order used by compiled code.
  std::vector<std::string> variables() const;
  symbolic::Binding binding(double t, std::span<const double> x) const;
};

// Expression strings in the infix grammar, parsed against the state names.
struct SystemText {
  std::vector<std::string> states;
  std::vector<std::string> inputs;
  std::vector<std::string> drift;
  std::vector<std::vector<std::string>> input_map;
  std::vector<std::string> output;
  std::vector<double> x0;
  double t0 = 0.0;
};

// Parses and validates. Syntax errors propagate from the parser.
InputAffineSystem parse_system(const SystemText& text);

}  // namespace fblc::system
