#include "fblc/symbolic/expr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "node.hpp"

namespace fblc::symbolic {

namespace {

constexpr std::size_t kHashMul = 0x9e3779b97f4a7c15ULL;

std::size_t mix(std::size_t h, std::size_t v) {
  h ^= v + kHashMul + (h << 6) + (h >> 2);
  return h;
}

std::size_t hash_double(double v) {
  if (v == 0.0) v = 0.0;  // fold -0 into +0
  return std::hash<double>{}(v);
}

const Expr& zero_expr() {
  static const Expr z = Expr::constant(0.0);
  return z;
}

int kind_rank(ExprKind k) {
  switch (k) {
    case ExprKind::kConstant: return 0;
    case ExprKind::kVariable: return 1;
    case ExprKind::kFunction: return 2;
    case ExprKind::kPower: return 3;
    case ExprKind::kProduct: return 4;
    case ExprKind::kSum: return 5;
    case ExprKind::kQuotient: return 6;
  }
  return 7;
}

template <typename T>
int cmp3(const T& a, const T& b) {
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

}  // namespace

const char* function_name(Function fn) {
  switch (fn) {
    case Function::kSin: return "sin";
    case Function::kCos: return "cos";
    case Function::kExp: return "exp";
    case Function::kLog: return "log";
    case Function::kSqrt: return "sqrt";
    case Function::kTanh: return "tanh";
  }
  return "?";
}

std::uint64_t variable_bit(const std::string& name) {
  return std::uint64_t{1} << (std::hash<std::string>{}(name) % 64);
}

Expr NodeFactory::make(Node node) {
  std::size_t h = static_cast<std::size_t>(node.kind) + 1;
  switch (node.kind) {
    case ExprKind::kConstant:
      if (node.value == 0.0) node.value = 0.0;
      h = mix(h, hash_double(node.value));
      break;
    case ExprKind::kVariable:
      h = mix(h, std::hash<std::string>{}(node.name));
      node.mask = variable_bit(node.name);
      break;
    case ExprKind::kPower:
      h = mix(h, static_cast<std::size_t>(node.exponent.num()));
      h = mix(h, static_cast<std::size_t>(node.exponent.den()));
      break;
    case ExprKind::kFunction:
      h = mix(h, static_cast<std::size_t>(node.fn) + 17);
      break;
    default:
      break;
  }
  for (const auto& a : node.args) {
    h = mix(h, a.hash());
    node.mask |= a.variable_mask();
  }
  node.hash = h;
  return Expr(std::make_shared<const Node>(std::move(node)));
}

Expr NodeFactory::make_compound(ExprKind kind, std::vector<Expr> args, bool canonical) {
  Node n;
  n.kind = kind;
  n.args = std::move(args);
  n.canonical = canonical;
  return make(std::move(n));
}

Expr NodeFactory::make_power(const Expr& base, Rational exponent, bool canonical) {
  Node n;
  n.kind = ExprKind::kPower;
  n.args = {base};
  n.exponent = exponent;
  n.canonical = canonical;
  return make(std::move(n));
}

Expr NodeFactory::make_function(Function fn, const Expr& arg, bool canonical) {
  Node n;
  n.kind = ExprKind::kFunction;
  n.fn = fn;
  n.args = {arg};
  n.canonical = canonical;
  return make(std::move(n));
}

Expr::Expr() : Expr(zero_expr()) {}

Expr::Expr(double value) : Expr(constant(value)) {}

Expr Expr::constant(double value) {
  Node n;
  n.kind = ExprKind::kConstant;
  n.value = value;
  n.canonical = true;
  return NodeFactory::make(std::move(n));
}

Expr Expr::variable(const std::string& name) {
  if (name.empty()) throw std::invalid_argument("empty variable name");
  Node n;
  n.kind = ExprKind::kVariable;
  n.name = name;
  n.canonical = true;
  return NodeFactory::make(std::move(n));
}

Expr Expr::raw_sum(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms.front();
  return NodeFactory::make_compound(ExprKind::kSum, std::move(terms), false);
}

Expr Expr::raw_product(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return factors.front();
  return NodeFactory::make_compound(ExprKind::kProduct, std::move(factors), false);
}

Expr Expr::raw_power(const Expr& base, Rational exponent) {
  return NodeFactory::make_power(base, exponent, false);
}

Expr Expr::raw_quotient(const Expr& num, const Expr& den) {
  return NodeFactory::make_compound(ExprKind::kQuotient, {num, den}, false);
}

Expr Expr::raw_function(Function fn, const Expr& arg) {
  return NodeFactory::make_function(fn, arg, false);
}

ExprKind Expr::kind() const { return node_->kind; }
bool Expr::is_constant() const { return node_->kind == ExprKind::kConstant; }
bool Expr::is_constant(double v) const { return is_constant() && node_->value == v; }
double Expr::value() const {
  if (!is_constant()) throw std::logic_error("value() on non-constant expression");
  return node_->value;
}
const std::string& Expr::name() const {
  if (node_->kind != ExprKind::kVariable) throw std::logic_error("name() on non-variable");
  return node_->name;
}
const std::vector<Expr>& Expr::args() const { return node_->args; }
const Expr& Expr::base() const {
  if (node_->kind != ExprKind::kPower) throw std::logic_error("base() on non-power");
  return node_->args.front();
}
Rational Expr::exponent() const {
  if (node_->kind != ExprKind::kPower) throw std::logic_error("exponent() on non-power");
  return node_->exponent;
}
Function Expr::function() const {
  if (node_->kind != ExprKind::kFunction) throw std::logic_error("function() on non-function");
  return node_->fn;
}
const Expr& Expr::arg() const {
  if (node_->kind != ExprKind::kFunction) throw std::logic_error("arg() on non-function");
  return node_->args.front();
}
std::size_t Expr::hash() const { return node_->hash; }
bool Expr::is_canonical() const { return node_->canonical; }
std::uint64_t Expr::variable_mask() const { return node_->mask; }

bool Expr::depends_on(const std::string& name) const {
  if ((node_->mask & variable_bit(name)) == 0) return false;
  if (node_->kind == ExprKind::kVariable) return node_->name == name;
  for (const auto& a : node_->args) {
    if (a.depends_on(name)) return true;
  }
  return false;
}

std::set<std::string> Expr::free_variables() const {
  std::set<std::string> out;
  std::unordered_set<const Node*> seen;
  std::function<void(const Expr&)> walk = [&](const Expr& e) {
    if (!seen.insert(e.id()).second) return;
    if (e.kind() == ExprKind::kVariable) {
      out.insert(e.name());
      return;
    }
    for (const auto& a : e.args()) walk(a);
  };
  walk(*this);
  return out;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const Node& x = *a.node_;
  const Node& y = *b.node_;
  if (x.hash != y.hash || x.kind != y.kind || x.args.size() != y.args.size()) return false;
  switch (x.kind) {
    case ExprKind::kConstant:
      return x.value == y.value;
    case ExprKind::kVariable:
      return x.name == y.name;
    case ExprKind::kPower:
      if (!(x.exponent == y.exponent)) return false;
      break;
    case ExprKind::kFunction:
      if (x.fn != y.fn) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < x.args.size(); ++i) {
    if (!(x.args[i] == y.args[i])) return false;
  }
  return true;
}

int compare(const Expr& a, const Expr& b) {
  if (a.id() == b.id()) return 0;
  int r = cmp3(kind_rank(a.kind()), kind_rank(b.kind()));
  if (r != 0) return r;
  switch (a.kind()) {
    case ExprKind::kConstant:
      return cmp3(a.value(), b.value());
    case ExprKind::kVariable:
      return cmp3(a.name(), b.name());
    case ExprKind::kPower:
      r = compare(a.base(), b.base());
      if (r != 0) return r;
      return cmp3(a.exponent(), b.exponent());
    case ExprKind::kFunction:
      r = cmp3(static_cast<int>(a.function()), static_cast<int>(b.function()));
      if (r != 0) return r;
      return compare(a.arg(), b.arg());
    default:
      break;
  }
  const auto& x = a.args();
  const auto& y = b.args();
  std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) {
    r = compare(x[i], y[i]);
    if (r != 0) return r;
  }
  return cmp3(x.size(), y.size());
}

bool ExprLess::operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }

// ---------------------------------------------------------------------------
// Canonical builders

namespace {

constexpr double kCancelTolerance = 4.0 * std::numeric_limits<double>::epsilon();

struct TermSplit {
  double coef;
  Expr rest;
};

TermSplit split_term(const Expr& t) {
  if (t.kind() == ExprKind::kProduct && t.args().front().is_constant()) {
    const auto& a = t.args();
    if (a.size() == 2) return {a[0].value(), a[1]};
    std::vector<Expr> rest(a.begin() + 1, a.end());
    return {a[0].value(), NodeFactory::make_compound(ExprKind::kProduct, std::move(rest), true)};
  }
  return {1.0, t};
}

// rest is canonical and neither a sum nor a constant nor a product with a
// leading coefficient.
Expr with_coefficient(const Expr& rest, double c) {
  if (c == 1.0) return rest;
  std::vector<Expr> args{Expr::constant(c)};
  if (rest.kind() == ExprKind::kProduct) {
    args.insert(args.end(), rest.args().begin(), rest.args().end());
  } else {
    args.push_back(rest);
  }
  return NodeFactory::make_compound(ExprKind::kProduct, std::move(args), true);
}

bool is_scaled_sum(const Expr& t) {
  return t.kind() == ExprKind::kProduct && t.args().size() == 2 && t.args()[0].is_constant() &&
         t.args()[1].kind() == ExprKind::kSum;
}

bool divides_to_integer(double k, double c) {
  double q = k / c;
  return std::fma(q, c, -k) == 0.0 && q == std::round(q);
}

bool multiplies_exactly(double a, double b) { return std::fma(a, b, -(a * b)) == 0.0; }

int factor_compare(const Expr& a, const Expr& b) {
  const Expr& ba = a.kind() == ExprKind::kPower ? a.base() : a;
  const Expr& bb = b.kind() == ExprKind::kPower ? b.base() : b;
  int r = compare(ba, bb);
  if (r != 0) return r;
  Rational ea = a.kind() == ExprKind::kPower ? a.exponent() : Rational(1);
  Rational eb = b.kind() == ExprKind::kPower ? b.exponent() : Rational(1);
  return cmp3(ea, eb);
}

// Folds v^(p/q) only when v is the q-th power of an integer, so that every
// path to the same power agrees on whether it is a number.
bool exact_root(double v, Rational r, double& out) {
  if (r.den() > 8 || r.num() > 16 || r.num() < -16 || v > 1e12) return false;
  double root = std::round(std::pow(v, 1.0 / static_cast<double>(r.den())));
  if (root < 1.0 || std::pow(root, static_cast<double>(r.den())) != v) return false;
  double y = std::pow(root, static_cast<double>(r.num()));
  if (!std::isfinite(y)) return false;
  out = y;
  return true;
}

}  // namespace

Expr add(std::vector<Expr> terms) {
  struct Acc {
    Expr rest;
    double coef;
    double mag;
  };
  double constant = 0.0;
  double constant_mag = 0.0;
  std::vector<Acc> accs;
  std::unordered_map<Expr, std::size_t, ExprHash> index;

  std::function<void(const Expr&, double)> visit = [&](const Expr& t, double scale) {
    switch (t.kind()) {
      case ExprKind::kConstant:
        constant += scale * t.value();
        constant_mag += std::fabs(scale * t.value());
        return;
      case ExprKind::kSum:
        for (const auto& c : t.args()) visit(c, scale);
        return;
      default:
        break;
    }
    if (is_scaled_sum(t)) {
      visit(t.args()[1], scale * t.args()[0].value());
      return;
    }
    auto [k, rest] = split_term(t);
    k *= scale;
    auto it = index.find(rest);
    if (it == index.end()) {
      index.emplace(rest, accs.size());
      accs.push_back({rest, k, std::fabs(k)});
    } else {
      accs[it->second].coef += k;
      accs[it->second].mag += std::fabs(k);
    }
  };
  for (auto& t : terms) visit(simplify(t), 1.0);

  std::vector<Acc> kept;
  for (auto& a : accs) {
    if (a.coef == 0.0 || std::fabs(a.coef) <= kCancelTolerance * a.mag) continue;
    kept.push_back(std::move(a));
  }
  if (std::fabs(constant) <= kCancelTolerance * constant_mag) constant = 0.0;
  if (kept.empty()) return Expr::constant(constant);
  std::sort(kept.begin(), kept.end(),
            [](const Acc& a, const Acc& b) { return compare(a.rest, b.rest) < 0; });
  if (constant == 0.0 && kept.size() == 1) return with_coefficient(kept[0].rest, kept[0].coef);

  // Pull out the magnitude of the leading coefficient when every other
  // coefficient is an exact integer multiple of it.
  double content = std::fabs(kept.front().coef);
  if (content != 1.0) {
    bool exact = divides_to_integer(constant, content);
    for (const auto& a : kept) exact = exact && divides_to_integer(a.coef, content);
    if (!exact) content = 1.0;
  }
  std::vector<Expr> children;
  children.reserve(kept.size() + 1);
  if (constant != 0.0) children.push_back(Expr::constant(constant / content));
  for (const auto& a : kept) children.push_back(with_coefficient(a.rest, a.coef / content));
  Expr sum = NodeFactory::make_compound(ExprKind::kSum, std::move(children), true);
  if (content == 1.0) return sum;
  return NodeFactory::make_compound(ExprKind::kProduct, {Expr::constant(content), sum}, true);
}

Expr mul(std::vector<Expr> factors) {
  double coef = 1.0;
  std::vector<std::pair<Expr, Rational>> groups;
  std::unordered_map<Expr, std::size_t, ExprHash> index;
  auto add_group = [&](const Expr& base, Rational r) {
    auto it = index.find(base);
    if (it == index.end()) {
      index.emplace(base, groups.size());
      groups.emplace_back(base, r);
    } else {
      groups[it->second].second = groups[it->second].second + r;
    }
  };

  std::vector<Expr> work;
  work.reserve(factors.size());
  for (auto& f : factors) work.push_back(simplify(f));
  std::vector<Expr> resolved;
  for (int guard = 0;; ++guard) {
    if (guard > 64) throw std::logic_error("product canonicalization did not converge");
    while (!work.empty()) {
      Expr f = std::move(work.back());
      work.pop_back();
      switch (f.kind()) {
        case ExprKind::kConstant:
          coef *= f.value();
          break;
        case ExprKind::kProduct:
          for (const auto& c : f.args()) work.push_back(c);
          break;
        case ExprKind::kPower:
          add_group(f.base(), f.exponent());
          break;
        default:
          add_group(f, Rational(1));
          break;
      }
    }
    bool requeue = false;
    resolved.clear();
    for (auto& [b, r] : groups) {
      if (r.is_zero()) continue;
      Expr p = r.is_one() ? b : pow(b, r);
      bool unstable = p.kind() == ExprKind::kConstant || p.kind() == ExprKind::kProduct;
      if (unstable) {
        work.push_back(p);
        requeue = true;
      } else {
        resolved.push_back(p);
      }
    }
    groups.clear();
    index.clear();
    if (!requeue) break;
    for (auto& r : resolved) work.push_back(r);
  }

  if (coef == 0.0) return Expr::constant(0.0);
  if (resolved.empty()) return Expr::constant(coef);
  std::sort(resolved.begin(), resolved.end(),
            [](const Expr& a, const Expr& b) { return factor_compare(a, b) < 0; });
  if (resolved.size() == 1) {
    const Expr& only = resolved.front();
    if (coef == 1.0) return only;
    if (only.kind() == ExprKind::kSum) {
      bool exact = true;
      std::vector<Expr> terms;
      for (const auto& t : only.args()) {
        if (t.is_constant()) {
          exact = exact && multiplies_exactly(coef, t.value());
          terms.push_back(Expr::constant(coef * t.value()));
        } else {
          auto [k, rest] = split_term(t);
          exact = exact && multiplies_exactly(coef, k);
          terms.push_back(with_coefficient(rest, coef * k));
        }
      }
      if (exact) return add(std::move(terms));
      return NodeFactory::make_compound(ExprKind::kProduct, {Expr::constant(coef), only}, true);
    }
    return with_coefficient(only, coef);
  }
  std::vector<Expr> children;
  children.reserve(resolved.size() + 1);
  if (coef != 1.0) children.push_back(Expr::constant(coef));
  for (auto& r : resolved) children.push_back(std::move(r));
  return NodeFactory::make_compound(ExprKind::kProduct, std::move(children), true);
}

Expr pow(const Expr& base_in, Rational r) {
  Expr base = simplify(base_in);
  if (r.is_zero()) return Expr::constant(1.0);
  if (r.is_one()) return base;
  switch (base.kind()) {
    case ExprKind::kConstant: {
      double v = base.value();
      if (v == 1.0) return base;
      if (v == 0.0) {
        if (r.num() > 0) return base;
        break;
      }
      if (r.is_integer()) {
        double y = std::pow(v, static_cast<double>(r.num()));
        if (std::isfinite(y)) return Expr::constant(y);
        break;
      }
      double y = 0.0;
      if (v > 0.0 && exact_root(v, r, y)) return Expr::constant(y);
      break;
    }
    case ExprKind::kPower:
      if (r.is_integer()) return pow(base.base(), base.exponent() * r);
      break;
    case ExprKind::kProduct: {
      if (r.is_integer()) {
        std::vector<Expr> parts;
        parts.reserve(base.args().size());
        for (const auto& f : base.args()) parts.push_back(pow(f, r));
        return mul(std::move(parts));
      }
      const Expr& head = base.args().front();
      if (head.is_constant() && head.value() > 0.0) {
        auto [k, rest] = split_term(base);
        return mul({pow(Expr::constant(k), r), pow(rest, r)});
      }
      break;
    }
    default:
      break;
  }
  return NodeFactory::make_power(base, r, true);
}

Expr apply(Function fn, const Expr& arg_in) {
  if (fn == Function::kSqrt) return pow(arg_in, Rational(1, 2));
  Expr arg = simplify(arg_in);
  if (arg.is_constant()) {
    double v = arg.value();
    double y = std::numeric_limits<double>::quiet_NaN();
    switch (fn) {
      case Function::kSin: y = std::sin(v); break;
      case Function::kCos: y = std::cos(v); break;
      case Function::kExp: y = std::exp(v); break;
      case Function::kLog: y = v > 0.0 ? std::log(v) : y; break;
      case Function::kTanh: y = std::tanh(v); break;
      case Function::kSqrt: break;
    }
    if (std::isfinite(y)) return Expr::constant(y);
  }
  return NodeFactory::make_function(fn, arg, true);
}

Expr operator+(const Expr& a, const Expr& b) { return add({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return add({a, mul({Expr::constant(-1.0), b})}); }
Expr operator*(const Expr& a, const Expr& b) { return mul({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return mul({a, pow(b, Rational(-1))}); }
Expr operator-(const Expr& a) { return mul({Expr::constant(-1.0), a}); }

Expr sin(const Expr& e) { return apply(Function::kSin, e); }
Expr cos(const Expr& e) { return apply(Function::kCos, e); }
Expr exp(const Expr& e) { return apply(Function::kExp, e); }
Expr log(const Expr& e) { return apply(Function::kLog, e); }
Expr sqrt(const Expr& e) { return pow(e, Rational(1, 2)); }
Expr tanh(const Expr& e) { return apply(Function::kTanh, e); }

}  // namespace fblc::symbolic
