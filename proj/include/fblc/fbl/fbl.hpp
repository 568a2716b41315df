#pragma once

#include <compare>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fblc/augment/augment.hpp"
#include "fblc/symbolic/eval.hpp"

namespace fblc::fbl {

using augment::AugmentedSystem;
using symbolic::Expr;
using system::AnchorPoint;
using system::EpsilonSequence;
using system::InputAffineSystem;
using system::NrdResult;

inline constexpr double kHysteresis = 1.05;

class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GainVector {
  std::vector<double> K;      // K_1 .. K_n, K_j multiplies E^(j-1)
  std::vector<double> poles;
  bool stable() const;
};

// Coefficients of prod (lambda - p_i), lowest power first.
GainVector pole_gains(const std::vector<double>& poles);

// Fits a pole list to the order: one value repeats, a long list is cut, a
// short list repeats its last entry.
std::vector<double> broadcast_poles(const std::vector<double>& poles, int order);

struct ErrorChain {
  int order = 0;
  Expr gamma_f;
  Expr gamma_g;
  Expr gamma_r;
  std::vector<Expr> error_states;  // E^(0) .. E^(order-1) over the augmented variables
  std::vector<Expr> reference_derivatives;  // y_r^(0) .. y_r^(order)
  NrdResult gamma;
};

// Tracking error derivatives of the first output on aug.base, anchored at its
// initial point.
ErrorChain error_chain(const AugmentedSystem& aug, const Expr& y_r, const EpsilonSequence& eps,
                       int max_order = system::kDefaultMaxOrder);

struct NrdSignature {
  std::vector<int> rho;
  int sigma = 0;
  auto operator<=>(const NrdSignature&) const = default;
  std::string to_string() const;
};

// Validity condition on one chain entry. Entries below the top order must
// stay small, the top entry must stay large.
struct SwitchPredicate {
  Expr expr;  // over t, original states and integral states
  double threshold = 0.0;
  bool must_exceed = false;
  std::string source;  // "omega1[0]", "gamma[2]", ...
  bool violated(double value) const;
};

struct SynthesizedController {
  Expr pi;                // eliminated
  Expr w_tilde;           // over augmented variables
  Expr u_reconstruction;  // eliminated
  std::vector<Expr> integral_rates;  // xi_k' eliminated; the last one is pi
  NrdSignature signature;
  std::vector<SwitchPredicate> switching;
  NrdResult gamma_chain;
  std::vector<Expr> error_state_exprs;  // eliminated
  Expr reference;
  GainVector gains;
  std::vector<std::string> original_states;
  std::vector<std::string> integral_states;
  std::shared_ptr<const AugmentedSystem> augmented;
  std::shared_ptr<const symbolic::CompiledExpr> compiled_predicates;

  // "t", original states, integral states.
  std::vector<std::string> variables() const;
};

SynthesizedController synthesize(const AugmentedSystem& aug, const Expr& y_r, const std::vector<double>& poles,
                                  const EpsilonSequence& eps, int max_order = system::kDefaultMaxOrder);

struct PipelineSettings {
  std::vector<Expr> constraints;
  Expr reference;
  std::vector<double> poles;
  std::vector<double> betas{100.0};
  EpsilonSequence eps{0.01};
  int max_order = system::kDefaultMaxOrder;
};

// Sequential capture then synthesis at (t, x). Integral states take `xi`
// when given, the zero-offset values otherwise.
SynthesizedController synthesize_at(const InputAffineSystem& sys, const PipelineSettings& settings, double t,
                                    std::span<const double> x, std::optional<std::vector<double>> xi = std::nullopt);

// True when (t, x, xi) has left the validity region of ctrl. Evaluation
// failures count as leaving it.
bool switch_check(const SynthesizedController& ctrl, double t, std::span<const double> x, std::span<const double> xi);
bool switch_check(const SynthesizedController& ctrl, std::span<const double> inputs);

// Sources of the violated predicates, for reporting.
std::vector<std::string> violated_predicates(const SynthesizedController& ctrl, std::span<const double> inputs);

class ControllerCache {
 public:
  void store(std::shared_ptr<const SynthesizedController> ctrl);
  std::shared_ptr<const SynthesizedController> lookup(const NrdSignature& sig) const;
  std::size_t size() const { return entries_.size(); }
  std::vector<NrdSignature> signatures() const;

 private:
  std::map<NrdSignature, std::shared_ptr<const SynthesizedController>> entries_;
};

std::string format_number(double v);
// Deterministic text export: signature, gains, laws, predicates, dynamics.
std::string export_controller(const SynthesizedController& ctrl);
std::string summary(const SynthesizedController& ctrl);

}  // namespace fblc::fbl
