#include "fblc/augment/augment.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace fblc::augment {

using symbolic::Binding;
using symbolic::DomainError;

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

// 1/2 sum_{j=1}^{i-1} C(i,j) z^(i-j) z^(j)
Expr leibniz_remainder(int i, const std::vector<Expr>& z) {
  std::vector<Expr> terms;
  for (int j = 1; j <= i - 1; ++j) terms.push_back(0.5 * binomial(i, j) * z[i - j] * z[j]);
  return symbolic::add(std::move(terms));
}

const SlackStage& last_stage(const AugmentedSystem& aug) {
  if (aug.stages.empty()) throw AugmentError("no captured constraint to wrap");
  return aug.stages.back();
}

}  // namespace

std::string slack_name(std::size_t stage, int derivative) {
  std::string k = std::to_string(stage);
  switch (derivative) {
    case 0: return "z" + k;
    case 1: return "dz" + k;
    case 2: return "ddz" + k;
    default: return "d" + std::to_string(derivative) + "z" + k;
  }
}

std::string virtual_input_name(std::size_t stage) { return "w" + std::to_string(stage); }
std::string integral_state_name(std::size_t stage) { return "xi" + std::to_string(stage); }
std::string integral_input_name(std::size_t stage) { return "wt" + std::to_string(stage); }

Expr bounded_sigmoid(const Expr& xi, double beta) {
  return 2.0 * beta * (1.0 / (symbolic::exp(-xi) + 1.0) - 0.5);
}

Expr bounded_sigmoid_derivative(const Expr& xi, double beta) {
  Expr e = symbolic::exp(-xi);
  return 2.0 * beta * e / symbolic::pow(e + 1.0, symbolic::Rational(2));
}

double bounded_sigmoid_value(double xi, double beta) { return 2.0 * beta * (1.0 / (std::exp(-xi) + 1.0) - 0.5); }

double bounded_sigmoid_inverse(double y, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(std::fabs(y) < beta)) {
    throw InputBoundInfeasible("integral offset needs |" + format_double(y) + "| < beta = " + format_double(beta),
                               std::fabs(y));
  }
  return std::log((beta + y) / (beta - y));
}

std::vector<std::string> AugmentedSystem::slack_states() const {
  std::vector<std::string> out;
  for (const auto& s : stages) out.insert(out.end(), s.slack_names.begin(), s.slack_names.end());
  return out;
}

std::vector<std::string> AugmentedSystem::integral_states() const {
  std::vector<std::string> out;
  for (const auto& s : stages) {
    if (s.integral) out.push_back(s.integral_state);
  }
  return out;
}

std::vector<NrdResult> AugmentedSystem::omega_chains() const {
  std::vector<NrdResult> out;
  for (const auto& s : stages) out.push_back(s.omega);
  return out;
}

std::vector<double> AugmentedSystem::betas() const {
  std::vector<double> out;
  for (const auto& s : stages) {
    if (s.integral) out.push_back(s.beta);
  }
  return out;
}

symbolic::Substitution AugmentedSystem::recovery_map() const {
  symbolic::Substitution map;
  for (const auto& s : stages) {
    for (std::size_t i = 0; i < s.slack_names.size(); ++i) map[s.slack_names[i]] = s.recovery_original[i];
  }
  return map;
}

Expr AugmentedSystem::eliminate(const Expr& e) const {
  if (stages.empty()) return e;
  return symbolic::substitute(e, recovery_map());
}

AugmentedSystem identity(const InputAffineSystem& sys) {
  sys.validate();
  if (sys.inputs.size() != 1) throw AugmentError("augmentation needs a single input system");
  AugmentedSystem aug;
  aug.original = sys;
  aug.base = sys;
  aug.input_reconstruction = Expr::variable(sys.inputs.front());
  return aug;
}

std::vector<Expr> leibniz_chain(const InputAffineSystem& sys, const Expr& phi, int order,
                                const std::vector<std::string>& slack_names, const std::string& top_derivative) {
  if (order < 1) throw std::invalid_argument("leibniz_chain: order must be at least 1");
  if (slack_names.size() < static_cast<std::size_t>(order)) throw std::invalid_argument("leibniz_chain: too few slack names");
  std::vector<Expr> z;
  for (int i = 0; i < order; ++i) z.push_back(Expr::variable(slack_names[i]));
  z.push_back(Expr::variable(top_derivative));
  auto lf = system::lie_f_chain(sys, phi, order);
  std::vector<Expr> out;
  for (int i = 0; i <= order; ++i) {
    std::vector<Expr> terms{lf[i]};
    for (int j = 0; j <= i; ++j) terms.push_back(0.5 * binomial(i, j) * z[i - j] * z[j]);
    if (i == order) terms.push_back(system::lie_g(sys, lf[order - 1]).front() * Expr::variable(sys.inputs.front()));
    out.push_back(symbolic::add(std::move(terms)));
  }
  return out;
}

std::vector<Expr> slack_recovery(const Expr& phi, const std::vector<Expr>& lie_f_chain, int order) {
  if (order < 1) throw std::invalid_argument("slack_recovery: order must be at least 1");
  if (lie_f_chain.size() < static_cast<std::size_t>(order)) throw std::invalid_argument("slack_recovery: chain too short");
  std::vector<Expr> z{symbolic::sqrt(-2.0 * phi)};
  for (int i = 1; i < order; ++i) z.push_back(-(lie_f_chain[i] + leibniz_remainder(i, z)) / z[0]);
  return z;
}

AugmentedSystem capture(const AugmentedSystem& aug, const Expr& phi_in, const EpsilonSequence& eps, int max_order) {
  const InputAffineSystem& base = aug.base;
  if (base.inputs.size() != 1) throw AugmentError("capture needs a single input system");
  const std::size_t k = aug.stages.size() + 1;
  const std::string tag = "constraint " + std::to_string(k);
  Expr phi = symbolic::simplify(phi_in);
  {
    std::set<std::string> allowed(base.states.begin(), base.states.end());
    allowed.insert(symbolic::kTimeVariable);
    for (const auto& v : phi.free_variables()) {
      if (allowed.count(v) == 0) throw system::SystemError(tag + " depends on unknown variable '" + v + "'");
    }
  }
  const AnchorPoint anchor = aug.anchor();
  const Binding at = base.binding(anchor.t, anchor.x);
  const double phi0 = symbolic::eval(phi, at);
  if (!(phi0 < -kFeasibilityMargin)) {
    throw InfeasibleAnchor("infeasible anchor: " + tag + " evaluates to " + format_double(phi0) +
                           ", needs to be strictly negative");
  }

  SlackStage st;
  st.index = k;
  st.constraint = phi;
  try {
    st.omega = system::eps_nrd(base, phi, eps, anchor, max_order);
  } catch (const system::NrdError& e) {
    throw system::NrdError(tag + ": " + e.what());
  }
  const int rho = st.omega.order;
  st.order = rho;
  for (int i = 0; i < rho; ++i) st.slack_names.push_back(slack_name(k, i));
  st.virtual_input = virtual_input_name(k);
  st.replaced_input = base.inputs.front();

  std::vector<Expr> z;
  for (const auto& n : st.slack_names) z.push_back(Expr::variable(n));
  const Expr w = Expr::variable(st.virtual_input);
  st.omega_g = st.omega.lie_g_chain[rho - 1];
  st.omega_f = st.omega.lie_f_chain[rho] + leibniz_remainder(rho, z);
  st.input_law = -(st.omega_f + z[0] * w) / st.omega_g;

  st.recovery = slack_recovery(phi, st.omega.lie_f_chain, rho);
  try {
    const double z0 = symbolic::eval(st.recovery[0], at);
    if (std::fabs(z0) < kSlackGuard) throw GuardedRegion(tag + ": slack vanishes at the anchor");
    for (const auto& r : st.recovery) st.slack_initial.push_back(symbolic::eval(r, at));
  } catch (const DomainError& e) {
    throw GuardedRegion(tag + ": slack recovery undefined at the anchor (" + e.what() + ")");
  }
  st.recovery_original.reserve(st.recovery.size());
  symbolic::Substitution earlier = aug.recovery_map();
  for (const auto& r : st.recovery) st.recovery_original.push_back(earlier.empty() ? r : symbolic::substitute(r, earlier));

  AugmentedSystem out = aug;
  InputAffineSystem& sys = out.base;
  const Expr drift_gain = -st.omega_f / st.omega_g;
  const Expr input_gain = -z[0] / st.omega_g;
  for (std::size_t i = 0; i < base.states.size(); ++i) {
    const Expr g = base.input_map[i][0];
    if (g.is_zero()) continue;
    sys.drift[i] = base.drift[i] + g * drift_gain;
    sys.input_map[i][0] = g * input_gain;
  }
  for (int i = 0; i < rho; ++i) {
    sys.states.push_back(st.slack_names[i]);
    sys.drift.push_back(i + 1 < rho ? z[i + 1] : Expr());
    sys.input_map.push_back({i + 1 < rho ? Expr() : Expr(1.0)});
    sys.x0.push_back(st.slack_initial[i]);
  }
  sys.inputs = {st.virtual_input};

  const symbolic::Substitution replace{{st.replaced_input, st.input_law}};
  out.input_reconstruction = symbolic::substitute(aug.input_reconstruction, replace);
  for (auto& [name, law] : out.input_laws) law = symbolic::substitute(law, replace);
  out.input_laws[st.replaced_input] = st.input_law;
  out.provenance.push_back("capture " + tag + " with slack order " + std::to_string(rho));
  out.stages.push_back(std::move(st));
  sys.validate();
  return out;
}

AugmentedSystem capture(const InputAffineSystem& sys, const Expr& phi, const EpsilonSequence& eps,
                        const AnchorPoint& anchor, int max_order) {
  InputAffineSystem anchored = sys;
  anchored.t0 = anchor.t;
  anchored.x0 = anchor.x;
  return capture(identity(anchored), phi, eps, max_order);
}

double integral_init(const AugmentedSystem& aug, double beta) {
  const SlackStage& st = last_stage(aug);
  if (st.integral) throw AugmentError("latest constraint already has an integral state");
  const Binding at = aug.base.binding(aug.base.t0, aug.base.x0);
  const double y = -symbolic::eval(st.omega_f, at) / st.slack_initial.front();
  return bounded_sigmoid_inverse(y, beta);
}

AugmentedSystem integralize(const AugmentedSystem& aug, double beta, std::optional<double> xi0) {
  const SlackStage& last = last_stage(aug);
  if (last.integral) throw AugmentError("latest constraint already has an integral state");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  const double offset = xi0.has_value() ? *xi0 : integral_init(aug, beta);

  AugmentedSystem out = aug;
  SlackStage& st = out.stages.back();
  st.integral = true;
  st.beta = beta;
  st.xi0 = offset;
  st.integral_state = integral_state_name(st.index);
  st.integral_input = integral_input_name(st.index);

  const Expr s = bounded_sigmoid(Expr::variable(st.integral_state), beta);
  InputAffineSystem& sys = out.base;
  for (std::size_t i = 0; i < sys.states.size(); ++i) {
    Expr& g = sys.input_map[i][0];
    if (g.is_zero()) continue;
    sys.drift[i] = sys.drift[i] + g * s;
    g = Expr();
  }
  sys.states.push_back(st.integral_state);
  sys.drift.emplace_back();
  sys.input_map.push_back({Expr(1.0)});
  sys.x0.push_back(offset);
  sys.inputs = {st.integral_input};

  const symbolic::Substitution replace{{st.virtual_input, s}};
  out.input_reconstruction = symbolic::substitute(out.input_reconstruction, replace);
  for (auto& [name, law] : out.input_laws) law = symbolic::substitute(law, replace);
  out.provenance.push_back("integral state " + st.integral_state + " with beta " + format_double(beta));
  sys.validate();
  return out;
}

AugmentedSystem sequential_capture(const InputAffineSystem& sys, const std::vector<Expr>& constraints,
                                   const EpsilonSequence& eps, const AnchorPoint& anchor,
                                   const std::vector<double>& betas, int max_order,
                                   const std::vector<double>& xi_override) {
  InputAffineSystem anchored = sys;
  anchored.t0 = anchor.t;
  anchored.x0 = anchor.x;
  AugmentedSystem aug = identity(anchored);
  if (constraints.empty()) return aug;
  if (betas.size() != 1 && betas.size() != constraints.size()) {
    throw std::invalid_argument("expected 1 or " + std::to_string(constraints.size()) + " beta values, got " +
                                std::to_string(betas.size()));
  }
  if (!xi_override.empty() && xi_override.size() != constraints.size()) {
    throw std::invalid_argument("integral state override has the wrong length");
  }
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    aug = capture(aug, constraints[k], eps, max_order);
    const double beta = betas.size() == 1 ? betas.front() : betas[k];
    std::optional<double> xi;
    if (!xi_override.empty()) xi = xi_override[k];
    aug = integralize(aug, beta, xi);
  }
  return aug;
}

std::string describe(const AugmentedSystem& aug) {
  std::ostringstream os;
  const auto& sys = aug.base;
  for (const auto& p : aug.provenance) os << "# " << p << "\n";
  for (std::size_t i = 0; i < sys.states.size(); ++i) {
    os << sys.states[i] << "' = " << sys.drift[i].to_string();
    for (std::size_t j = 0; j < sys.inputs.size(); ++j) {
      const Expr& g = sys.input_map[i][j];
      if (!g.is_zero()) os << " + (" << g.to_string() << ")*" << sys.inputs[j];
    }
    os << "\n";
  }
  for (const auto& st : aug.stages) {
    for (std::size_t i = 0; i < st.slack_names.size(); ++i) {
      os << st.slack_names[i] << " = " << st.recovery_original[i].to_string() << "\n";
    }
  }
  os << aug.original.inputs.front() << " = " << aug.input_reconstruction.to_string() << "\n";
  return os.str();
}

}  // namespace fblc::augment
