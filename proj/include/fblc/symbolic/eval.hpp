#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fblc/symbolic/expr.hpp"

namespace fblc::symbolic {

inline constexpr const char* kTimeVariable = "t";

class DomainError : public std::runtime_error {
 public:
  DomainError(const std::string& reason, std::string subtree)
      : std::runtime_error(reason + " in " + subtree), subtree_(std::move(subtree)) {}
  const std::string& subtree() const { return subtree_; }

 private:
  std::string subtree_;
};

class MissingBinding : public std::runtime_error {
 public:
  explicit MissingBinding(const std::string& name)
      : std::runtime_error("no value bound for variable '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

struct Binding {
  double t = 0.0;
  std::unordered_map<std::string, double> values;

  Binding() = default;
  explicit Binding(double time) : t(time) {}
  Binding& set(const std::string& name, double v) {
    if (name == kTimeVariable) {
      t = v;
    } else {
      values[name] = v;
    }
    return *this;
  }
  std::optional<double> lookup(const std::string& name) const;
};

double eval(const Expr& e, const Binding& b);

// Flattened evaluation program shared across several outputs. Common
// subtrees are evaluated once. Not safe for concurrent evaluate() calls on
// the same instance since it owns its scratch buffer.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const std::vector<Expr>& outputs, const std::vector<std::string>& variables);

  std::size_t output_count() const { return outputs_.size(); }
  std::size_t input_count() const { return input_count_; }
  void evaluate(std::span<const double> inputs, std::span<double> out) const;
  double evaluate_one(std::span<const double> inputs, std::size_t index = 0) const;

 private:
  enum class Op : std::uint8_t {
    kInput, kConst, kSum, kProduct, kSquare, kInverse, kSqrt, kInvSqrt, kPowInt, kPowReal,
    kDivide, kSin, kCos, kExp, kLog, kTanh,
  };
  struct Instr {
    Op op;
    std::uint32_t first = 0;  // index into operands_ or input slot
    std::uint32_t count = 0;
    double c = 0.0;
    std::int64_t num = 0;
    std::int64_t den = 1;
  };
  std::uint32_t emit(const Expr& e, std::unordered_map<Expr, std::uint32_t, ExprHash>& memo,
                     const std::unordered_map<std::string, std::uint32_t>& slots);
  void run(std::span<const double> inputs) const;
  [[noreturn]] void fail(std::size_t instr, const char* reason) const;

  std::vector<Instr> program_;
  std::vector<std::uint32_t> operands_;
  std::vector<Expr> sources_;
  std::vector<std::uint32_t> outputs_;
  std::size_t input_count_ = 0;
  mutable std::vector<double> scratch_;
};

}  // namespace fblc::symbolic
