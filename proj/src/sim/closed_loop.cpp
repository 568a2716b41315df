#include <cmath>
#include <sstream>

#include "fblc/sim/sim.hpp"

namespace fblc::sim {

using fbl::SynthesizedController;
using symbolic::CompiledExpr;
using symbolic::DomainError;

void RunConfig::validate(double t0) const {
  if (!(t_end >= t0)) throw std::invalid_argument("horizon ends before the initial time");
  if (!(integrator.rtol > 0.0) || !(integrator.atol > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (!(integrator.max_step > 0.0)) throw std::invalid_argument("max step must be positive");
  if (!(event_tolerance > 0.0)) throw std::invalid_argument("event tolerance must be positive");
  if (poles.empty()) throw std::invalid_argument("pole list is empty");
  if (betas.empty()) throw std::invalid_argument("beta list is empty");
}

namespace {

struct CompiledLaw {
  std::shared_ptr<const SynthesizedController> ctrl;
  CompiledExpr dynamics;  // x', xi', then u
};

class LoopRunner {
 public:
  LoopRunner(const InputAffineSystem& sys, std::vector<Expr> capture, std::vector<Expr> report, const Expr& y_r,
             const RunConfig& cfg)
      : sys_(sys), capture_(std::move(capture)), report_(std::move(report)), y_r_(symbolic::simplify(y_r)), cfg_(cfg) {
    sys_.validate();
    cfg_.validate(sys_.t0);
    n_ = sys_.states.size();
    r_ = capture_.size();
    vars_ = sys_.variables();
    for (std::size_t k = 1; k <= r_; ++k) vars_.push_back(augment::integral_state_name(k));
    std::vector<Expr> obs{sys_.output.front(), y_r_};
    obs.insert(obs.end(), report_.begin(), report_.end());
    observe_ = CompiledExpr(obs, vars_);
    in_.assign(vars_.size(), 0.0);
    out_.assign(n_ + r_ + 1, 0.0);
  }

  Trajectory run();

 private:
  struct Resolved {
    std::shared_ptr<const SynthesizedController> ctrl;
    std::vector<double> xi0;
  };
  Resolved resolve(double t, std::span<const double> state, std::optional<std::vector<double>> xi);
  std::shared_ptr<CompiledLaw> compile(std::shared_ptr<const SynthesizedController> ctrl);
  void rhs(double t, std::span<const double> s, std::span<double> ds);
  std::vector<double> inputs(double t, std::span<const double> s) const;
  bool triggered(double t, std::span<const double> s) const;
  void record(Trajectory& tr, double t, std::span<const double> s, const std::string& mark);

  InputAffineSystem sys_;
  std::vector<Expr> capture_;
  std::vector<Expr> report_;
  Expr y_r_;
  RunConfig cfg_;
  std::size_t n_ = 0;
  std::size_t r_ = 0;
  std::vector<std::string> vars_;
  CompiledExpr observe_;
  fbl::ControllerCache cache_;
  std::map<fbl::NrdSignature, std::shared_ptr<CompiledLaw>> laws_;
  std::shared_ptr<CompiledLaw> law_;
  std::vector<double> in_, out_;
  std::size_t syntheses_ = 0;
};

LoopRunner::Resolved LoopRunner::resolve(double t, std::span<const double> state, std::optional<std::vector<double>> xi) {
  std::vector<double> x(state.begin(), state.begin() + n_);
  auto aug = augment::sequential_capture(sys_, capture_, cfg_.eps, {t, x}, cfg_.betas, cfg_.max_order,
                                         xi.value_or(std::vector<double>{}));
  Resolved out;
  for (const auto& st : aug.stages) out.xi0.push_back(st.xi0);
  auto ec = fbl::error_chain(aug, y_r_, cfg_.eps, cfg_.max_order);
  fbl::NrdSignature sig;
  for (const auto& st : aug.stages) sig.rho.push_back(st.order);
  sig.sigma = ec.order;
  out.ctrl = cache_.lookup(sig);
  if (!out.ctrl) {
    out.ctrl = std::make_shared<const SynthesizedController>(fbl::synthesize(aug, y_r_, cfg_.poles, cfg_.eps, cfg_.max_order));
    cache_.store(out.ctrl);
    ++syntheses_;
  }
  return out;
}

std::shared_ptr<CompiledLaw> LoopRunner::compile(std::shared_ptr<const SynthesizedController> ctrl) {
  auto it = laws_.find(ctrl->signature);
  if (it != laws_.end()) return it->second;
  std::vector<Expr> outputs;
  const Expr& u = ctrl->u_reconstruction;
  for (std::size_t i = 0; i < n_; ++i) outputs.push_back(sys_.drift[i] + sys_.input_map[i][0] * u);
  outputs.insert(outputs.end(), ctrl->integral_rates.begin(), ctrl->integral_rates.end());
  outputs.push_back(u);
  auto law = std::make_shared<CompiledLaw>(CompiledLaw{ctrl, CompiledExpr(outputs, vars_)});
  laws_[ctrl->signature] = law;
  return law;
}

std::vector<double> LoopRunner::inputs(double t, std::span<const double> s) const {
  std::vector<double> in{t};
  in.insert(in.end(), s.begin(), s.end());
  return in;
}

void LoopRunner::rhs(double t, std::span<const double> s, std::span<double> ds) {
  in_[0] = t;
  std::copy(s.begin(), s.end(), in_.begin() + 1);
  law_->dynamics.evaluate(in_, out_);
  std::copy(out_.begin(), out_.begin() + static_cast<std::ptrdiff_t>(n_ + r_), ds.begin());
}

bool LoopRunner::triggered(double t, std::span<const double> s) const {
  return fbl::switch_check(*law_->ctrl, inputs(t, s));
}

void LoopRunner::record(Trajectory& tr, double t, std::span<const double> s, const std::string& mark) {
  auto in = inputs(t, s);
  std::vector<double> obs(observe_.output_count(), std::nan(""));
  try {
    observe_.evaluate(in, obs);
  } catch (const DomainError&) {
  }
  double u = std::nan("");
  try {
    u = law_->dynamics.evaluate_one(in, n_ + r_);
  } catch (const DomainError&) {
  }
  tr.t.push_back(t);
  tr.x.emplace_back(s.begin(), s.end());
  tr.u.push_back(u);
  tr.y.push_back(obs[0]);
  tr.y_ref.push_back(obs[1]);
  tr.phi.emplace_back(obs.begin() + 2, obs.end());
  tr.event_marks.push_back(mark);
}

Trajectory LoopRunner::run() {
  Trajectory tr;
  tr.state_names.assign(vars_.begin() + 1, vars_.end());
  tr.original_count = n_;
  tr.constraint_count = report_.size();

  std::optional<std::vector<double>> xi_start;
  if (!cfg_.xi0.empty()) {
    if (cfg_.xi0.size() != r_) throw std::invalid_argument("xi0 needs one value per constraint");
    xi_start = cfg_.xi0;
  }
  Resolved first = resolve(sys_.t0, sys_.x0, xi_start);
  law_ = compile(first.ctrl);
  tr.signatures.push_back(first.ctrl->signature.to_string());

  std::vector<double> state = sys_.x0;
  state.insert(state.end(), first.xi0.begin(), first.xi0.end());
  double t = sys_.t0;
  record(tr, t, state, "");
  if (cfg_.t_end == t) {
    tr.syntheses = syntheses_;
    return tr;
  }

  Stepper stepper([this](double tt, std::span<const double> s, std::span<double> ds) { rhs(tt, s, ds); }, state.size(),
                  cfg_.integrator);
  std::vector<double> next(state.size()), probe(state.size()), hi_state(state.size());
  double h = stepper.initial_step(t, state, cfg_.t_end);
  std::size_t steps = 0;
  const double t_end = cfg_.t_end;
  while (t < t_end) {
    if (++steps > cfg_.integrator.max_steps) throw SimulationError("step limit reached at t = " + fbl::format_number(t), t);
    const bool last = h >= t_end - t;
    const double step = last ? t_end - t : h;
    auto res = stepper.attempt(t, state, step, next);
    if (!res.accepted) {
      h = res.next_h;
      if (h < 1e-14 * std::max(1.0, std::fabs(t))) {
        throw SimulationError("step size underflow at t = " + fbl::format_number(t) + ": " + stepper.last_failure(), t);
      }
      continue;
    }
    const double t_new = last ? t_end : t + step;
    if (!triggered(t_new, next)) {
      t = t_new;
      state.swap(next);
      record(tr, t, state, "");
      h = res.next_h;
      continue;
    }

    // Localize the first trigger inside (t, t_new].
    double lo = 0.0, hi = t_new - t;
    hi_state = next;
    while (hi - lo > cfg_.event_tolerance) {
      const double mid = 0.5 * (lo + hi);
      bool trig = true;
      try {
        stepper.advance(t, state, mid, probe);
        trig = triggered(t + mid, probe);
      } catch (const DomainError&) {
      }
      if (trig) {
        hi = mid;
        hi_state = probe;
      } else {
        lo = mid;
      }
    }
    const double t_event = t + hi;
    Event ev;
    ev.t = t_event;
    ev.from = law_->ctrl->signature.to_string();
    ev.reasons = fbl::violated_predicates(*law_->ctrl, inputs(t_event, hi_state));

    Resolved next_ctrl;
    try {
      next_ctrl = resolve(t_event, hi_state, std::vector<double>(hi_state.begin() + n_, hi_state.end()));
    } catch (const std::exception& e) {
      throw SimulationError("re-synthesis at t = " + fbl::format_number(t_event) + " failed: " + e.what(), t_event);
    }
    ev.to = next_ctrl.ctrl->signature.to_string();
    if (ev.to == ev.from) {
      throw SimulationError("re-synthesis at t = " + fbl::format_number(t_event) + " kept signature " + ev.to, t_event);
    }
    if (tr.events.size() >= cfg_.max_events) {
      throw SimulationError("more than " + std::to_string(cfg_.max_events) + " switching events", t_event);
    }
    law_ = compile(next_ctrl.ctrl);
    if (triggered(t_event, hi_state)) {
      throw SimulationError("controller " + ev.to + " is not valid at its own anchor", t_event);
    }
    if (std::find(tr.signatures.begin(), tr.signatures.end(), ev.to) == tr.signatures.end()) tr.signatures.push_back(ev.to);
    tr.events.push_back(ev);
    t = t_event;
    state = hi_state;
    record(tr, t, state, ev.to);
    stepper.reset();
    h = std::max(res.next_h, 1e-6);
  }
  tr.syntheses = syntheses_;
  return tr;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  return fbl::format_number(v);
}

}  // namespace

std::string Trajectory::csv_header() const {
  std::string h = "t";
  for (const auto& s : state_names) h += "," + s;
  h += ",u,y,y_ref";
  for (std::size_t k = 1; k <= constraint_count; ++k) h += ",phi" + std::to_string(k);
  return h + ",event";
}

std::string Trajectory::to_csv() const {
  std::ostringstream os;
  os << csv_header() << "\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << csv_number(t[i]);
    for (double v : x[i]) os << "," << csv_number(v);
    os << "," << csv_number(u[i]) << "," << csv_number(y[i]) << "," << csv_number(y_ref[i]);
    for (double v : phi[i]) os << "," << csv_number(v);
    os << "," << event_marks[i] << "\n";
  }
  return os.str();
}

double Trajectory::max_phi() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& row : phi) {
    for (double v : row) {
      if (!std::isnan(v)) m = std::max(m, v);
    }
  }
  return m;
}

double Trajectory::final_tracking_error() const {
  if (t.empty()) return std::nan("");
  return std::fabs(y.back() - y_ref.back());
}

Trajectory run_closed_loop(const InputAffineSystem& sys, const std::vector<Expr>& constraints, const Expr& y_r,
                           const RunConfig& cfg) {
  return LoopRunner(sys, constraints, constraints, y_r, cfg).run();
}

Trajectory run_classical_fbl(const InputAffineSystem& sys, const Expr& y_r, const RunConfig& cfg,
                             const std::vector<Expr>& report_constraints) {
  return LoopRunner(sys, {}, report_constraints, y_r, cfg).run();
}

Samples simulate_open_loop(const InputAffineSystem& sys, const InputSignal& w, double t1, const IntegratorSettings& cfg) {
  const std::size_t n = sys.states.size();
  std::vector<Expr> outputs(sys.drift.begin(), sys.drift.end());
  for (std::size_t i = 0; i < n; ++i) outputs.push_back(sys.input_map[i][0]);
  auto prog = std::make_shared<CompiledExpr>(outputs, sys.variables());
  auto in = std::make_shared<std::vector<double>>(n + 1);
  auto out = std::make_shared<std::vector<double>>(2 * n);
  VectorField rhs = [prog, in, out, n, &w](double t, std::span<const double> x, std::span<double> dx) {
    (*in)[0] = t;
    std::copy(x.begin(), x.end(), in->begin() + 1);
    prog->evaluate(*in, *out);
    const double u = w(t, x);
    for (std::size_t i = 0; i < n; ++i) dx[i] = (*out)[i] + (*out)[n + i] * u;
  };
  return integrate(rhs, sys.x0, sys.t0, t1, cfg);
}

}  // namespace fblc::sim
