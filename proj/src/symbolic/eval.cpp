#include "fblc/symbolic/eval.hpp"

#include <cmath>
#include <unordered_map>

namespace fblc::symbolic {

std::optional<double> Binding::lookup(const std::string& name) const {
  if (name == kTimeVariable) return t;
  auto it = values.find(name);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

namespace {

double checked(double v, const Expr& e) {
  if (!std::isfinite(v)) throw DomainError("non-finite value", e.to_string());
  return v;
}

double power_value(double b, std::int64_t num, std::int64_t den, const Expr& e) {
  if (b == 0.0 && num < 0) throw DomainError("division by zero", e.to_string());
  if (den == 1) {
    if (num == 2) return b * b;
    if (num == -1) return 1.0 / b;
    return std::pow(b, static_cast<double>(num));
  }
  double r = static_cast<double>(num) / static_cast<double>(den);
  if (b < 0.0) {
    if (den % 2 == 0) throw DomainError("root of negative value", e.to_string());
    double mag = std::pow(-b, r);
    return (num % 2 == 0) ? mag : -mag;
  }
  if (num == 1 && den == 2) return std::sqrt(b);
  if (num == -1 && den == 2) return 1.0 / std::sqrt(b);
  return std::pow(b, r);
}

double function_value(Function fn, double a, const Expr& e) {
  switch (fn) {
    case Function::kSin: return std::sin(a);
    case Function::kCos: return std::cos(a);
    case Function::kExp: return std::exp(a);
    case Function::kLog:
      if (a <= 0.0) throw DomainError("log of non-positive value", e.to_string());
      return std::log(a);
    case Function::kSqrt:
      if (a < 0.0) throw DomainError("root of negative value", e.to_string());
      return std::sqrt(a);
    case Function::kTanh: return std::tanh(a);
  }
  return 0.0;
}

double eval_rec(const Expr& e, const Binding& b, std::unordered_map<const void*, double>& memo) {
  switch (e.kind()) {
    case ExprKind::kConstant:
      return e.value();
    case ExprKind::kVariable: {
      auto v = b.lookup(e.name());
      if (!v) throw MissingBinding(e.name());
      return *v;
    }
    default:
      break;
  }
  auto it = memo.find(e.id());
  if (it != memo.end()) return it->second;
  double out = 0.0;
  switch (e.kind()) {
    case ExprKind::kSum:
      for (const auto& a : e.args()) out += eval_rec(a, b, memo);
      break;
    case ExprKind::kProduct:
      out = 1.0;
      for (const auto& a : e.args()) out *= eval_rec(a, b, memo);
      break;
    case ExprKind::kPower: {
      Rational r = e.exponent();
      out = power_value(eval_rec(e.base(), b, memo), r.num(), r.den(), e);
      break;
    }
    case ExprKind::kQuotient: {
      double n = eval_rec(e.args()[0], b, memo);
      double d = eval_rec(e.args()[1], b, memo);
      if (d == 0.0) throw DomainError("division by zero", e.to_string());
      out = n / d;
      break;
    }
    case ExprKind::kFunction:
      out = function_value(e.function(), eval_rec(e.arg(), b, memo), e);
      break;
    default:
      break;
  }
  out = checked(out, e);
  memo.emplace(e.id(), out);
  return out;
}

}  // namespace

double eval(const Expr& e, const Binding& b) {
  std::unordered_map<const void*, double> memo;
  return eval_rec(e, b, memo);
}

CompiledExpr::CompiledExpr(const std::vector<Expr>& outputs, const std::vector<std::string>& variables) {
  std::unordered_map<std::string, std::uint32_t> slots;
  for (std::size_t i = 0; i < variables.size(); ++i) {
    slots.emplace(variables[i], static_cast<std::uint32_t>(i));
  }
  input_count_ = variables.size();
  std::unordered_map<Expr, std::uint32_t, ExprHash> memo;
  for (const auto& e : outputs) outputs_.push_back(emit(e, memo, slots));
  scratch_.resize(program_.size());
}

std::uint32_t CompiledExpr::emit(const Expr& e, std::unordered_map<Expr, std::uint32_t, ExprHash>& memo,
                                 const std::unordered_map<std::string, std::uint32_t>& slots) {
  auto it = memo.find(e);
  if (it != memo.end()) return it->second;
  Instr ins{};
  std::vector<std::uint32_t> children;
  switch (e.kind()) {
    case ExprKind::kConstant:
      ins.op = Op::kConst;
      ins.c = e.value();
      break;
    case ExprKind::kVariable: {
      auto s = slots.find(e.name());
      if (s == slots.end()) throw MissingBinding(e.name());
      ins.op = Op::kInput;
      ins.first = s->second;
      break;
    }
    case ExprKind::kSum:
    case ExprKind::kProduct:
      ins.op = e.kind() == ExprKind::kSum ? Op::kSum : Op::kProduct;
      for (const auto& a : e.args()) children.push_back(emit(a, memo, slots));
      break;
    case ExprKind::kQuotient:
      ins.op = Op::kDivide;
      for (const auto& a : e.args()) children.push_back(emit(a, memo, slots));
      break;
    case ExprKind::kPower: {
      Rational r = e.exponent();
      children.push_back(emit(e.base(), memo, slots));
      ins.num = r.num();
      ins.den = r.den();
      if (r == Rational(2)) {
        ins.op = Op::kSquare;
      } else if (r == Rational(-1)) {
        ins.op = Op::kInverse;
      } else if (r == Rational(1, 2)) {
        ins.op = Op::kSqrt;
      } else if (r == Rational(-1, 2)) {
        ins.op = Op::kInvSqrt;
      } else if (r.is_integer()) {
        ins.op = Op::kPowInt;
      } else {
        ins.op = Op::kPowReal;
      }
      break;
    }
    case ExprKind::kFunction:
      children.push_back(emit(e.arg(), memo, slots));
      switch (e.function()) {
        case Function::kSin: ins.op = Op::kSin; break;
        case Function::kCos: ins.op = Op::kCos; break;
        case Function::kExp: ins.op = Op::kExp; break;
        case Function::kLog: ins.op = Op::kLog; break;
        case Function::kSqrt: ins.op = Op::kSqrt; ins.num = 1; ins.den = 2; break;
        case Function::kTanh: ins.op = Op::kTanh; break;
      }
      break;
  }
  if (ins.op != Op::kInput) {
    ins.first = static_cast<std::uint32_t>(operands_.size());
    ins.count = static_cast<std::uint32_t>(children.size());
    operands_.insert(operands_.end(), children.begin(), children.end());
  }
  auto index = static_cast<std::uint32_t>(program_.size());
  program_.push_back(ins);
  sources_.push_back(e);
  memo.emplace(e, index);
  return index;
}

void CompiledExpr::fail(std::size_t instr, const char* reason) const {
  throw DomainError(reason, sources_[instr].to_string());
}

void CompiledExpr::run(std::span<const double> in) const {
  if (in.size() < input_count_) throw std::invalid_argument("compiled expression: too few inputs");
  double* s = scratch_.data();
  const std::uint32_t* ops = operands_.data();
  for (std::size_t i = 0; i < program_.size(); ++i) {
    const Instr& ins = program_[i];
    double v = 0.0;
    switch (ins.op) {
      case Op::kInput:
        v = in[ins.first];
        break;
      case Op::kConst:
        v = ins.c;
        break;
      case Op::kSum:
        for (std::uint32_t k = 0; k < ins.count; ++k) v += s[ops[ins.first + k]];
        break;
      case Op::kProduct:
        v = 1.0;
        for (std::uint32_t k = 0; k < ins.count; ++k) v *= s[ops[ins.first + k]];
        break;
      case Op::kSquare: {
        double b = s[ops[ins.first]];
        v = b * b;
        break;
      }
      case Op::kInverse: {
        double b = s[ops[ins.first]];
        if (b == 0.0) fail(i, "division by zero");
        v = 1.0 / b;
        break;
      }
      case Op::kSqrt: {
        double b = s[ops[ins.first]];
        if (b < 0.0) fail(i, "root of negative value");
        v = std::sqrt(b);
        break;
      }
      case Op::kInvSqrt: {
        double b = s[ops[ins.first]];
        if (b < 0.0) fail(i, "root of negative value");
        if (b == 0.0) fail(i, "division by zero");
        v = 1.0 / std::sqrt(b);
        break;
      }
      case Op::kPowInt: {
        double b = s[ops[ins.first]];
        if (b == 0.0 && ins.num < 0) fail(i, "division by zero");
        v = std::pow(b, static_cast<double>(ins.num));
        break;
      }
      case Op::kPowReal: {
        double b = s[ops[ins.first]];
        if (b == 0.0 && ins.num < 0) fail(i, "division by zero");
        double r = static_cast<double>(ins.num) / static_cast<double>(ins.den);
        if (b < 0.0) {
          if (ins.den % 2 == 0) fail(i, "root of negative value");
          double mag = std::pow(-b, r);
          v = (ins.num % 2 == 0) ? mag : -mag;
        } else {
          v = std::pow(b, r);
        }
        break;
      }
      case Op::kDivide: {
        double d = s[ops[ins.first + 1]];
        if (d == 0.0) fail(i, "division by zero");
        v = s[ops[ins.first]] / d;
        break;
      }
      case Op::kSin: v = std::sin(s[ops[ins.first]]); break;
      case Op::kCos: v = std::cos(s[ops[ins.first]]); break;
      case Op::kExp: v = std::exp(s[ops[ins.first]]); break;
      case Op::kLog: {
        double a = s[ops[ins.first]];
        if (a <= 0.0) fail(i, "log of non-positive value");
        v = std::log(a);
        break;
      }
      case Op::kTanh: v = std::tanh(s[ops[ins.first]]); break;
    }
    if (!std::isfinite(v)) fail(i, "non-finite value");
    s[i] = v;
  }
}

void CompiledExpr::evaluate(std::span<const double> inputs, std::span<double> out) const {
  run(inputs);
  for (std::size_t k = 0; k < outputs_.size() && k < out.size(); ++k) out[k] = scratch_[outputs_[k]];
}

double CompiledExpr::evaluate_one(std::span<const double> inputs, std::size_t index) const {
  run(inputs);
  return scratch_[outputs_.at(index)];
}

}  // namespace fblc::symbolic
