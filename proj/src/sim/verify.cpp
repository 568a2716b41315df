#include <cmath>
#include <random>
#include <sstream>

#include "fblc/sim/sim.hpp"
#include "fblc/symbolic/eval.hpp"

namespace fblc::sim {

using symbolic::CompiledExpr;
using symbolic::DomainError;

ConstraintReport verify_constraints(const Trajectory& traj, double tol) {
  ConstraintReport r;
  r.tolerance = tol;
  r.max_phi.assign(traj.constraint_count, -std::numeric_limits<double>::infinity());
  for (const auto& row : traj.phi) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (std::isnan(row[k])) {
        r.passed = false;
        continue;
      }
      r.max_phi[k] = std::max(r.max_phi[k], row[k]);
    }
  }
  for (double m : r.max_phi) {
    if (m > tol) r.passed = false;
  }
  return r;
}

ConservationReport verify_conservation(const Samples& samples, const augment::AugmentedSystem& aug) {
  ConservationReport r;
  const auto vars = aug.base.variables();
  for (const auto& st : aug.stages) {
    const auto z_index = aug.base.state_index(st.slack_names.front());
    if (!z_index) throw std::logic_error("slack state missing from the captured system");
    CompiledExpr phi_prog({st.constraint}, vars);
    CompiledExpr slack_prog({st.recovery_original.front()}, vars);
    double initial = 0.0, drift = 0.0, max_phi = -std::numeric_limits<double>::infinity(), rec = 0.0;
    std::vector<double> in(vars.size());
    for (std::size_t i = 0; i < samples.t.size(); ++i) {
      in[0] = samples.t[i];
      std::copy(samples.x[i].begin(), samples.x[i].end(), in.begin() + 1);
      const double z = samples.x[i][*z_index];
      const double phi = phi_prog.evaluate_one(in);
      const double invariant = phi + 0.5 * z * z;
      if (i == 0) initial = invariant;
      drift = std::max(drift, std::fabs(invariant - initial));
      max_phi = std::max(max_phi, phi);
      try {
        rec = std::max(rec, std::fabs(slack_prog.evaluate_one(in) - std::fabs(z)));
      } catch (const DomainError&) {
        // phi slightly positive within tolerance; covered by max_phi.
      }
    }
    r.max_drift.push_back(drift);
    r.max_phi.push_back(max_phi);
    r.max_recovery.push_back(rec);
  }
  return r;
}

std::size_t Theorem1Report::passed() const {
  std::size_t n = 0;
  for (const auto& t : trials) n += t.passed ? 1 : 0;
  return n;
}

Theorem1Report random_input_theorem1(const InputAffineSystem& sys, const Expr& phi, const system::EpsilonSequence& eps,
                                     const Theorem1Settings& settings) {
  Theorem1Report report;
  report.seed = settings.seed;
  report.tolerance = settings.tolerance;
  std::mt19937_64 rng(settings.seed);
  const std::size_t n = sys.states.size();
  std::vector<std::pair<double, double>> box = settings.box;
  if (box.empty()) box.assign(n, {-1.0, 1.0});
  if (box.size() != n) throw std::invalid_argument("sampling box needs one interval per state");
  CompiledExpr phi_prog({phi}, sys.variables());

  for (std::size_t s = 0; s < settings.starts; ++s) {
    std::vector<double> x0(n);
    std::vector<double> in(n + 1);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("no interior start found in the sampling box");
      for (std::size_t i = 0; i < n; ++i) x0[i] = std::uniform_real_distribution<double>(box[i].first, box[i].second)(rng);
      in[0] = sys.t0;
      std::copy(x0.begin(), x0.end(), in.begin() + 1);
      if (phi_prog.evaluate_one(in) < -0.05) break;
    }
    auto aug = augment::capture(sys, phi, eps, {sys.t0, x0});
    const std::size_t pieces = static_cast<std::size_t>(std::ceil(settings.horizon / settings.piece_length - 1e-12));
    std::uniform_real_distribution<double> level(-settings.input_bound, settings.input_bound);
    for (std::size_t trial = 0; trial < settings.inputs_per_start; ++trial) {
      std::vector<double> values(pieces);
      for (auto& v : values) v = level(rng);
      Samples all;
      InputAffineSystem piece_sys = aug.base;
      for (std::size_t p = 0; p < pieces; ++p) {
        const double t1 = std::min(sys.t0 + (p + 1) * settings.piece_length, sys.t0 + settings.horizon);
        const double w = values[p];
        auto part = simulate_open_loop(piece_sys, [w](double, std::span<const double>) { return w; }, t1,
                                       settings.integrator);
        std::size_t from = all.t.empty() ? 0 : 1;
        all.t.insert(all.t.end(), part.t.begin() + from, part.t.end());
        all.x.insert(all.x.end(), part.x.begin() + from, part.x.end());
        piece_sys.t0 = part.t.back();
        piece_sys.x0 = part.x.back();
      }
      auto cons = verify_conservation(all, aug);
      Theorem1Trial tr;
      tr.start = x0;
      tr.max_phi = cons.max_phi.front();
      tr.max_drift = cons.max_drift.front();
      tr.passed = tr.max_phi <= settings.tolerance && tr.max_drift < settings.tolerance;
      report.trials.push_back(std::move(tr));
    }
  }
  return report;
}

bool StructureReport::passed() const {
  return bindings > 0 && plain_order > 0 && zero_at_boundary == bindings && beta_spread <= tolerance &&
         delayed == bindings;
}

namespace {

// Input coefficients of the first output, orders 1..max_order.
std::vector<Expr> coefficient_chain(const InputAffineSystem& sys, int max_order) {
  std::vector<Expr> out;
  Expr h = sys.output.front();
  for (int i = 0; i < max_order; ++i) {
    out.push_back(symbolic::simplify(system::lie_g(sys, h).front()));
    h = system::lie_derivative(sys, h);
  }
  return out;
}

int first_structural(const std::vector<Expr>& chain) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (!symbolic::is_identically_zero(chain[i])) return static_cast<int>(i) + 1;
  }
  return 0;
}

int first_significant(const std::vector<Expr>& chain, const symbolic::Binding& b, double threshold) {
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (std::fabs(symbolic::eval(chain[i], b)) > threshold) return static_cast<int>(i) + 1;
  }
  return 0;
}

}  // namespace

StructureReport capture_structure_checks(const InputAffineSystem& sys, const Expr& phi, const system::EpsilonSequence& eps,
                               std::uint64_t seed, std::size_t bindings) {
  constexpr int kOrders = 8;
  StructureReport r;
  auto captured = augment::capture(sys, phi, eps, {sys.t0, sys.x0});
  const auto& stage = captured.stages.front();
  auto plain = coefficient_chain(captured.base, kOrders);
  r.plain_order = first_structural(plain);
  if (r.plain_order == 0) return r;

  const std::vector<double> betas{1.0, 10.0, 100.0};
  std::vector<Expr> scaled;
  std::vector<Expr> wrapped;
  for (double beta : betas) {
    auto integral = augment::integralize(captured, beta, 0.0);
    auto chain = coefficient_chain(integral.base, kOrders);
    const int order = first_structural(chain);
    if (order == 0) return r;
    scaled.push_back(chain[static_cast<std::size_t>(order - 1)] / Expr(beta));
    if (beta == 100.0) wrapped = chain;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (std::size_t n = 0; n < bindings; ++n) {
    symbolic::Binding b(0.0);
    b.set("t", sys.t0 + 0.5 * d(rng));
    for (std::size_t i = 0; i < sys.states.size(); ++i) b.set(sys.states[i], sys.x0[i] + d(rng));
    for (std::size_t i = 0; i < stage.slack_names.size(); ++i) {
      b.set(stage.slack_names[i], stage.slack_initial[i] + d(rng));
    }
    b.set(stage.slack_names.front(), 0.5 + std::fabs(stage.slack_initial.front()) * (1.0 + 0.5 * d(rng)));
    b.set(augment::integral_state_name(1), 2.0 * d(rng));

    const int generic = first_significant(plain, b, r.tolerance);
    if (generic > 0 && first_significant(wrapped, b, r.tolerance) == generic + 1) ++r.delayed;

    double ref = symbolic::eval(scaled.front(), b);
    for (std::size_t k = 1; k < scaled.size(); ++k) {
      const double v = symbolic::eval(scaled[k], b);
      r.beta_spread = std::max(r.beta_spread, std::fabs(v - ref) / std::max(std::fabs(ref), 1e-300));
    }

    symbolic::Binding at_zero = b;
    at_zero.set(stage.slack_names.front(), 0.0);
    if (symbolic::eval(plain[static_cast<std::size_t>(r.plain_order - 1)], at_zero) == 0.0) ++r.zero_at_boundary;
    ++r.bindings;
  }
  return r;
}

EliminationReport check_elimination(const fbl::SynthesizedController& ctrl, std::uint64_t seed,
                                    std::size_t bindings) {
  EliminationReport r;
  const auto& aug = *ctrl.augmented;
  const auto recovery = aug.recovery_map();
  std::vector<Expr> constraints;
  for (const auto& st : aug.stages) constraints.push_back(st.constraint);
  const auto& orig = aug.original;
  std::vector<double> xi0;
  for (const auto& st : aug.stages) xi0.push_back(st.xi0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::size_t attempts = 0;
  while (r.bindings < bindings) {
    if (++attempts > 1000 * bindings) break;
    symbolic::Binding b(0.0);
    b.set("t", orig.t0 + 0.1 * d(rng));
    for (std::size_t i = 0; i < orig.states.size(); ++i) b.set(orig.states[i], orig.x0[i] * (1.0 + 0.1 * d(rng)) + 0.1 * d(rng));
    for (std::size_t k = 0; k < xi0.size(); ++k) b.set(ctrl.integral_states[k], xi0[k] + 0.1 * d(rng));
    bool feasible = true;
    for (const auto& c : constraints) feasible = feasible && symbolic::eval(c, b) < -1e-3;
    if (!feasible) continue;
    try {
      symbolic::Binding full = b;
      for (const auto& [name, e] : recovery) full.set(name, symbolic::eval(e, b));
      const double a = symbolic::eval(ctrl.pi, b);
      const double w = symbolic::eval(ctrl.w_tilde, full);
      if (!std::isfinite(a) || !std::isfinite(w)) continue;
      r.max_relative_error = std::max(r.max_relative_error, std::fabs(a - w) / std::max(1.0, std::fabs(a)));
      ++r.bindings;
    } catch (const DomainError&) {
    }
  }
  return r;
}

}  // namespace fblc::sim
