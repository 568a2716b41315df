#include "fblc/system/lie.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace fblc::system {

using symbolic::Binding;
using symbolic::DomainError;

EpsilonSequence::EpsilonSequence(double scalar) : EpsilonSequence(std::vector<double>{scalar}) {}

EpsilonSequence::EpsilonSequence(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("epsilon sequence is empty");
  for (double v : values_) {
    if (!(v > 0.0)) throw std::invalid_argument("epsilon entries must be positive");
  }
}

double EpsilonSequence::operator[](std::size_t i) const { return values_[std::min(i, values_.size() - 1)]; }

Expr lie_derivative(const InputAffineSystem& sys, const Expr& psi) {
  std::vector<Expr> terms{symbolic::diff(psi, symbolic::kTimeVariable)};
  for (std::size_t i = 0; i < sys.states.size(); ++i) {
    if (sys.drift[i].is_zero() || !psi.depends_on(sys.states[i])) continue;
    terms.push_back(symbolic::diff(psi, sys.states[i]) * sys.drift[i]);
  }
  return symbolic::add(std::move(terms));
}

std::vector<Expr> lie_f_chain(const InputAffineSystem& sys, const Expr& psi, int j) {
  if (j < 0) throw std::invalid_argument("lie_f: negative order");
  std::vector<Expr> chain{symbolic::simplify(psi)};
  for (int k = 1; k <= j; ++k) chain.push_back(lie_derivative(sys, chain.back()));
  return chain;
}

Expr lie_f(const InputAffineSystem& sys, const Expr& psi, int j) { return lie_f_chain(sys, psi, j).back(); }

std::vector<Expr> lie_g(const InputAffineSystem& sys, const Expr& psi) {
  std::vector<Expr> row;
  for (std::size_t u = 0; u < sys.inputs.size(); ++u) {
    std::vector<Expr> terms;
    for (std::size_t i = 0; i < sys.states.size(); ++i) {
      const Expr& g = sys.input_map[i][u];
      if (g.is_zero() || !psi.depends_on(sys.states[i])) continue;
      terms.push_back(symbolic::diff(psi, sys.states[i]) * g);
    }
    row.push_back(symbolic::add(std::move(terms)));
  }
  return row;
}

std::vector<Expr> lie_g_lie_f(const InputAffineSystem& sys, const Expr& psi, int j) {
  return lie_g(sys, lie_f(sys, psi, j));
}

namespace {

enum class Probe { kZero, kNonZero, kMixed };

// Samples the coefficient row at random points and at points where one
// variable is pinned to zero.
Probe probe_row(const std::vector<Expr>& row) {
  std::set<std::string> vars;
  for (const auto& e : row) {
    auto v = e.free_variables();
    vars.insert(v.begin(), v.end());
  }
  std::mt19937_64 rng(0x6a09e667f3bcc908ULL);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  int zero = 0;
  int nonzero = 0;
  auto sample = [&](const std::string* pinned) {
    Binding b;
    for (const auto& v : vars) b.set(v, (pinned != nullptr && *pinned == v) ? 0.0 : dist(rng));
    double mag = 0.0;
    try {
      for (const auto& e : row) mag = std::max(mag, std::fabs(symbolic::eval(e, b)));
    } catch (const DomainError&) {
      return;
    }
    if (mag < 1e-10) {
      ++zero;
    } else {
      ++nonzero;
    }
  };
  for (int k = 0; k < 24; ++k) sample(nullptr);
  for (const auto& v : vars) {
    for (int k = 0; k < 2; ++k) sample(&v);
  }
  if (nonzero == 0) return Probe::kZero;
  if (zero == 0) return Probe::kNonZero;
  return Probe::kMixed;
}

}  // namespace

RelativeDegree relative_degree(const InputAffineSystem& sys, const Expr& psi, int max_order) {
  if (max_order < 1) throw std::invalid_argument("relative_degree: max_order must be at least 1");
  Expr current = symbolic::simplify(psi);
  for (int i = 0; i < max_order; ++i) {
    auto row = lie_g(sys, current);
    bool structural_zero = std::all_of(row.begin(), row.end(), [](const Expr& e) { return symbolic::is_identically_zero(e); });
    if (!structural_zero) {
      switch (probe_row(row)) {
        case Probe::kNonZero:
          return {i + 1, ""};
        case Probe::kZero:
        case Probe::kMixed:
          return {std::nullopt, "input coefficient of order " + std::to_string(i + 1) +
                                    " vanishes on part of the domain"};
      }
    }
    current = lie_derivative(sys, current);
  }
  return {std::nullopt, "no input coefficient survives up to order " + std::to_string(max_order)};
}

NrdResult eps_nrd(const InputAffineSystem& sys, const Expr& psi, const EpsilonSequence& eps,
                  const AnchorPoint& anchor, int max_order) {
  if (sys.inputs.empty()) throw NrdError("eps_nrd: system has no input");
  if (max_order < 1) throw std::invalid_argument("eps_nrd: max_order must be at least 1");
  Binding b = sys.binding(anchor.t, anchor.x);
  NrdResult r;
  r.lie_f_chain.push_back(symbolic::simplify(psi));
  for (int i = 0; i < max_order; ++i) {
    const Expr& current = r.lie_f_chain.back();
    Expr coef = lie_g(sys, current).front();
    double mag = coef.is_zero() ? 0.0 : std::fabs(symbolic::eval(coef, b));
    r.lie_g_chain.push_back(coef);
    r.magnitudes.push_back(mag);
    r.lie_f_chain.push_back(lie_derivative(sys, current));
    if (mag > eps[static_cast<std::size_t>(i)]) {
      r.order = i + 1;
      return r;
    }
  }
  throw NrdError("no numerical relative degree up to max_order " + std::to_string(max_order));
}

}  // namespace fblc::system
