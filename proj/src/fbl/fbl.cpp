#include "fblc/fbl/fbl.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace fblc::fbl {

using symbolic::DomainError;

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string format_list(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i != 0) out += ", ";
    out += format_number(v[i]);
  }
  return out + "]";
}

void add_predicates(std::vector<SwitchPredicate>& out, const AugmentedSystem& aug, const NrdResult& chain,
                    const EpsilonSequence& eps, const std::string& name) {
  for (int i = 0; i < chain.order; ++i) {
    SwitchPredicate p;
    p.expr = aug.eliminate(chain.lie_g_chain[i]);
    p.threshold = eps[static_cast<std::size_t>(i)];
    p.must_exceed = i + 1 == chain.order;
    p.source = name + "[" + std::to_string(i) + "]";
    // A constant entry never changes its verdict after synthesis.
    if (p.expr.is_constant() && !p.violated(p.expr.value())) continue;
    out.push_back(std::move(p));
  }
}

}  // namespace

bool GainVector::stable() const {
  for (double p : poles) {
    if (!(p < 0.0)) return false;
  }
  return true;
}

GainVector pole_gains(const std::vector<double>& poles) {
  if (poles.empty()) throw std::invalid_argument("pole list is empty");
  std::vector<double> c{1.0};
  for (double p : poles) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i + 1] += c[i];
      next[i] -= p * c[i];
    }
    c = std::move(next);
  }
  GainVector g;
  g.poles = poles;
  g.K.assign(c.begin(), c.end() - 1);
  return g;
}

std::vector<double> broadcast_poles(const std::vector<double>& poles, int order) {
  if (poles.empty()) throw std::invalid_argument("pole list is empty");
  if (order < 1) throw std::invalid_argument("order must be positive");
  std::vector<double> out(poles.begin(), poles.begin() + std::min<std::size_t>(poles.size(), order));
  while (out.size() < static_cast<std::size_t>(order)) out.push_back(out.back());
  return out;
}

ErrorChain error_chain(const AugmentedSystem& aug, const Expr& y_r, const EpsilonSequence& eps, int max_order) {
  const auto& sys = aug.base;
  if (sys.output.empty()) throw SynthesisError("system has no output");
  ErrorChain ec;
  try {
    ec.gamma = system::eps_nrd(sys, sys.output.front(), eps, aug.anchor(), max_order);
  } catch (const system::NrdError& e) {
    throw SynthesisError(std::string("output: ") + e.what());
  }
  ec.order = ec.gamma.order;
  Expr r = symbolic::simplify(y_r);
  for (const auto& v : r.free_variables()) {
    if (v != symbolic::kTimeVariable) throw SynthesisError("reference depends on '" + v + "', only t is allowed");
  }
  ec.reference_derivatives.push_back(r);
  for (int i = 1; i <= ec.order; ++i) ec.reference_derivatives.push_back(symbolic::diff(ec.reference_derivatives.back(), symbolic::kTimeVariable));
  for (int i = 0; i < ec.order; ++i) ec.error_states.push_back(ec.gamma.lie_f_chain[i] - ec.reference_derivatives[i]);
  ec.gamma_f = ec.gamma.lie_f_chain[ec.order];
  ec.gamma_g = ec.gamma.lie_g_chain[ec.order - 1];
  ec.gamma_r = ec.reference_derivatives[ec.order];
  return ec;
}

std::string NrdSignature::to_string() const {
  std::string out = "rho=[";
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (i != 0) out += ";";
    out += std::to_string(rho[i]);
  }
  return out + "] sigma=" + std::to_string(sigma);
}

bool SwitchPredicate::violated(double value) const {
  const double mag = std::fabs(value);
  if (must_exceed) return !(mag > threshold);
  return !(mag <= kHysteresis * threshold);
}

std::vector<std::string> SynthesizedController::variables() const {
  std::vector<std::string> v{symbolic::kTimeVariable};
  v.insert(v.end(), original_states.begin(), original_states.end());
  v.insert(v.end(), integral_states.begin(), integral_states.end());
  return v;
}

SynthesizedController synthesize(const AugmentedSystem& aug, const Expr& y_r, const std::vector<double>& poles,
                                 const EpsilonSequence& eps, int max_order) {
  ErrorChain ec = error_chain(aug, y_r, eps, max_order);
  SynthesizedController c;
  c.gains = pole_gains(broadcast_poles(poles, ec.order));

  std::vector<Expr> nu_terms;
  for (int j = 0; j < ec.order; ++j) nu_terms.push_back(-c.gains.K[j] * ec.error_states[j]);
  const Expr nu = symbolic::add(std::move(nu_terms));
  c.w_tilde = -(ec.gamma_f - ec.gamma_r - nu) / ec.gamma_g;

  c.original_states = aug.original.states;
  c.integral_states = aug.integral_states();
  c.pi = aug.eliminate(c.w_tilde);
  {
    std::set<std::string> allowed(c.original_states.begin(), c.original_states.end());
    allowed.insert(c.integral_states.begin(), c.integral_states.end());
    allowed.insert(symbolic::kTimeVariable);
    for (const auto& v : c.pi.free_variables()) {
      if (allowed.count(v) == 0) throw SynthesisError("elimination left '" + v + "' in the controller");
    }
  }
  const std::string& top_input = aug.base.inputs.front();
  c.u_reconstruction = aug.eliminate(symbolic::substitute(aug.input_reconstruction, {{top_input, c.w_tilde}}));
  for (const auto& st : aug.stages) {
    if (!st.integral) throw SynthesisError("constraint " + std::to_string(st.index) + " has no integral state");
    if (st.integral_input == top_input) {
      c.integral_rates.push_back(c.pi);
    } else {
      c.integral_rates.push_back(aug.eliminate(aug.input_laws.at(st.integral_input)));
    }
  }

  for (const auto& st : aug.stages) {
    c.signature.rho.push_back(st.order);
    add_predicates(c.switching, aug, st.omega, eps, "omega" + std::to_string(st.index));
  }
  c.signature.sigma = ec.order;
  add_predicates(c.switching, aug, ec.gamma, eps, "gamma");

  for (const auto& e : ec.error_states) c.error_state_exprs.push_back(aug.eliminate(e));
  c.gamma_chain = std::move(ec.gamma);
  c.reference = ec.reference_derivatives.front();
  c.augmented = std::make_shared<const AugmentedSystem>(aug);
  std::vector<Expr> preds;
  for (const auto& p : c.switching) preds.push_back(p.expr);
  c.compiled_predicates = std::make_shared<const symbolic::CompiledExpr>(preds, c.variables());
  return c;
}

SynthesizedController synthesize_at(const InputAffineSystem& sys, const PipelineSettings& settings, double t,
                                    std::span<const double> x, std::optional<std::vector<double>> xi) {
  AnchorPoint anchor{t, std::vector<double>(x.begin(), x.end())};
  auto aug = augment::sequential_capture(sys, settings.constraints, settings.eps, anchor, settings.betas,
                                         settings.max_order, xi.value_or(std::vector<double>{}));
  return synthesize(aug, settings.reference, settings.poles, settings.eps, settings.max_order);
}

bool switch_check(const SynthesizedController& ctrl, std::span<const double> inputs) {
  const auto& prog = *ctrl.compiled_predicates;
  if (prog.output_count() == 0) return false;
  std::vector<double> values(prog.output_count());
  try {
    prog.evaluate(inputs, values);
  } catch (const DomainError&) {
    return true;
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (ctrl.switching[i].violated(values[i])) return true;
  }
  return false;
}

bool switch_check(const SynthesizedController& ctrl, double t, std::span<const double> x, std::span<const double> xi) {
  std::vector<double> in{t};
  in.insert(in.end(), x.begin(), x.end());
  in.insert(in.end(), xi.begin(), xi.end());
  return switch_check(ctrl, in);
}

std::vector<std::string> violated_predicates(const SynthesizedController& ctrl, std::span<const double> inputs) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ctrl.switching.size(); ++i) {
    try {
      if (ctrl.switching[i].violated(ctrl.compiled_predicates->evaluate_one(inputs, i))) out.push_back(ctrl.switching[i].source);
    } catch (const DomainError&) {
      out.push_back(ctrl.switching[i].source + " (undefined)");
    }
  }
  return out;
}

void ControllerCache::store(std::shared_ptr<const SynthesizedController> ctrl) {
  entries_[ctrl->signature] = std::move(ctrl);
}

std::shared_ptr<const SynthesizedController> ControllerCache::lookup(const NrdSignature& sig) const {
  auto it = entries_.find(sig);
  return it == entries_.end() ? nullptr : it->second;
}

std::vector<NrdSignature> ControllerCache::signatures() const {
  std::vector<NrdSignature> out;
  for (const auto& [sig, ctrl] : entries_) out.push_back(sig);
  return out;
}

std::string export_controller(const SynthesizedController& c) {
  std::ostringstream os;
  os << "signature: " << c.signature.to_string() << "\n";
  os << "poles: " << format_list(c.gains.poles) << "\n";
  os << "gains: " << format_list(c.gains.K) << "\n";
  os << "reference: " << c.reference.to_string() << "\n";
  os << "pi = " << c.pi.to_string() << "\n";
  os << "u = " << c.u_reconstruction.to_string() << "\n";
  for (std::size_t k = 0; k < c.integral_rates.size(); ++k) {
    os << c.integral_states[k] << "' = " << c.integral_rates[k].to_string() << "\n";
  }
  for (std::size_t i = 0; i < c.error_state_exprs.size(); ++i) {
    os << "E" << i << " = " << c.error_state_exprs[i].to_string() << "\n";
  }
  for (const auto& p : c.switching) {
    os << "valid " << p.source << ": |" << p.expr.to_string() << (p.must_exceed ? "| > " : "| <= ")
       << format_number(p.threshold) << "\n";
  }
  os << "augmented dynamics:\n" << augment::describe(*c.augmented);
  return os.str();
}

std::string summary(const SynthesizedController& c) {
  std::ostringstream os;
  os << "signature " << c.signature.to_string() << "\n";
  os << "gains " << format_list(c.gains.K) << " for poles " << format_list(c.gains.poles) << "\n";
  if (!c.gains.stable()) os << "warning: pole list contains non-negative entries\n";
  os << c.switching.size() << " switching predicates";
  for (const auto& p : c.switching) os << (&p == &c.switching.front() ? ": " : ", ") << p.source;
  os << "\n";
  return os.str();
}

}  // namespace fblc::fbl
