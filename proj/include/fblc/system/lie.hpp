#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fblc/system/input_affine_system.hpp"

namespace fblc::system {

inline constexpr int kDefaultMaxOrder = 10;

struct AnchorPoint {
  double t = 0.0;
  std::vector<double> x;
};

// Threshold per derivative order. A single value applies to every order and
// a short list repeats its last entry.
class EpsilonSequence {
 public:
  EpsilonSequence(double scalar);  // NOLINT
  EpsilonSequence(std::vector<double> values);  // NOLINT
  double operator[](std::size_t i) const;
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct NrdResult {
  int order = 0;
  std::vector<Expr> lie_f_chain;   // L_f^0 .. L_f^order
  std::vector<Expr> lie_g_chain;   // L_g L_f^0 .. L_g L_f^(order-1)
  std::vector<double> magnitudes;  // |lie_g_chain[i]| at the anchor
};

struct RelativeDegree {
  std::optional<int> order;
  std::string reason;  // set when undefined
  bool defined() const { return order.has_value(); }
};

class NrdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One step: dpsi/dx f + dpsi/dt.
Expr lie_derivative(const InputAffineSystem& sys, const Expr& psi);
Expr lie_f(const InputAffineSystem& sys, const Expr& psi, int j);
std::vector<Expr> lie_f_chain(const InputAffineSystem& sys, const Expr& psi, int j);
std::vector<Expr> lie_g(const InputAffineSystem& sys, const Expr& psi);
std::vector<Expr> lie_g_lie_f(const InputAffineSystem& sys, const Expr& psi, int j);

RelativeDegree relative_degree(const InputAffineSystem& sys, const Expr& psi,
                               int max_order = kDefaultMaxOrder);

// SISO: uses the first input column.
NrdResult eps_nrd(const InputAffineSystem& sys, const Expr& psi, const EpsilonSequence& eps,
                  const AnchorPoint& anchor, int max_order = kDefaultMaxOrder);

}  // namespace fblc::system
