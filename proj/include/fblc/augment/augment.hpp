#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fblc/system/input_affine_system.hpp"
#include "fblc/system/lie.hpp"

namespace fblc::augment {

using symbolic::Expr;
using system::AnchorPoint;
using system::EpsilonSequence;
using system::InputAffineSystem;
using system::NrdResult;

inline constexpr double kFeasibilityMargin = 1e-9;
inline constexpr double kSlackGuard = 1e-8;

class AugmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Anchor on or outside a constraint boundary.
class InfeasibleAnchor : public AugmentError {
 public:
  using AugmentError::AugmentError;
};

// The integral offset needs |s_beta^-1 argument| < beta.
class InputBoundInfeasible : public AugmentError {
 public:
  InputBoundInfeasible(const std::string& msg, double required_beta)
      : AugmentError(msg), required_beta_(required_beta) {}
  double required_beta() const { return required_beta_; }

 private:
  double required_beta_;
};

// Slack value too close to zero for the recovery divisions.
class GuardedRegion : public AugmentError {
 public:
  using AugmentError::AugmentError;
};

struct SlackStage {
  std::size_t index = 0;  // 1-based
  Expr constraint;
  NrdResult omega;  // chains on the base system this stage captured
  int order = 0;
  std::vector<std::string> slack_names;  // z, z', ..., z^(order-1)
  std::string virtual_input;             // z^(order)
  std::string replaced_input;            // input of the base system
  Expr omega_g;
  Expr omega_f;
  Expr input_law;  // replaced_input as a function of the new variables
  std::vector<Expr> recovery;           // over the base system variables
  std::vector<Expr> recovery_original;  // over t, original states and earlier integral states
  std::vector<double> slack_initial;

  bool integral = false;
  std::string integral_state;
  std::string integral_input;
  double beta = 0.0;
  double xi0 = 0.0;
};

struct AugmentedSystem {
  InputAffineSystem original;
  InputAffineSystem base;  // current system
  std::vector<SlackStage> stages;
  Expr input_reconstruction;             // original input over current variables
  std::map<std::string, Expr> input_laws;  // every replaced input over current variables
  std::vector<std::string> provenance;

  std::vector<std::string> slack_states() const;
  std::vector<std::string> integral_states() const;
  std::vector<NrdResult> omega_chains() const;
  std::vector<double> betas() const;
  // Slack name -> expression over t, original states and integral states.
  symbolic::Substitution recovery_map() const;
  Expr eliminate(const Expr& e) const;
  AnchorPoint anchor() const { return {base.t0, base.x0}; }
};

std::string slack_name(std::size_t stage, int derivative);
std::string virtual_input_name(std::size_t stage);
std::string integral_state_name(std::size_t stage);
std::string integral_input_name(std::size_t stage);

Expr bounded_sigmoid(const Expr& xi, double beta);
Expr bounded_sigmoid_derivative(const Expr& xi, double beta);
double bounded_sigmoid_value(double xi, double beta);
double bounded_sigmoid_inverse(double y, double beta);

AugmentedSystem identity(const InputAffineSystem& sys);

// d^i/dt^i (phi + z^2/2) for i = 0..order, with slack derivatives as the
// given formal variables. Entry `order` also carries the input term.
std::vector<Expr> leibniz_chain(const InputAffineSystem& sys, const Expr& phi, int order,
                                const std::vector<std::string>& slack_names,
                                const std::string& top_derivative);

// z = sqrt(-2 phi), z^(i) = -(L_f^i phi + S_(i-1)) / z with the lower
// recoveries substituted. lie_f_chain must hold at least `order` entries.
std::vector<Expr> slack_recovery(const Expr& phi, const std::vector<Expr>& lie_f_chain, int order);

// Captures phi on aug.base anchored at the base initial point.
AugmentedSystem capture(const AugmentedSystem& aug, const Expr& phi, const EpsilonSequence& eps,
                        int max_order = system::kDefaultMaxOrder);
AugmentedSystem capture(const InputAffineSystem& sys, const Expr& phi, const EpsilonSequence& eps,
                        const AnchorPoint& anchor, int max_order = system::kDefaultMaxOrder);

// Offset that makes the replaced input vanish at the base initial point,
// for the most recent stage.
double integral_init(const AugmentedSystem& aug, double beta);

AugmentedSystem integralize(const AugmentedSystem& aug, double beta, std::optional<double> xi0 = std::nullopt);

AugmentedSystem sequential_capture(const InputAffineSystem& sys, const std::vector<Expr>& constraints,
                                   const EpsilonSequence& eps, const AnchorPoint& anchor,
                                   const std::vector<double>& betas,
                                   int max_order = system::kDefaultMaxOrder,
                                   const std::vector<double>& xi_override = {});

// Human readable listing of the current dynamics and recovery expressions.
std::string describe(const AugmentedSystem& aug);

}  // namespace fblc::augment
