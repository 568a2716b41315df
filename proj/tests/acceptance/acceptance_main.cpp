// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "fblc/fbl/fbl.hpp"
#include "fblc/sim/sim.hpp"
#include "fixtures.hpp"

namespace {

using namespace fblc;
using symbolic::Binding;
using symbolic::Expr;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) { return fbl::format_number(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

sim::RunConfig first_config(double pole) {
  sim::RunConfig cfg;
  cfg.t_end = 6.0;
  cfg.betas = {100.0};
  cfg.eps = 0.01;
  cfg.poles = {pole};
  cfg.integrator.rtol = cfg.integrator.atol = 1e-8;
  return cfg;
}

// Constraint, tracking and event checks shared by the two pole settings.
struct FirstRunChecks {
  bool constraint = false, tracking = false;
  std::string text;
};

FirstRunChecks check_first_run(const sim::Trajectory& tr) {
  FirstRunChecks c;
  double lo = tr.y.front(), hi = lo;
  for (double y : tr.y) lo = std::min(lo, y), hi = std::max(hi, y);
  c.constraint = tr.max_phi() <= 1e-6;
  c.tracking = std::fabs(tr.y.back()) <= 0.01 * (hi - lo);
  c.text = "max phi " + num(tr.max_phi()) + ", |y(6)| " + num(std::fabs(tr.y.back())) + " vs 0.01*range " +
           num(0.01 * (hi - lo));
  return c;
}

Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  auto tr = sim::run_closed_loop(fixtures::first_example(), {fixtures::first_constraint()}, Expr(0.0),
                                 first_config(-2.9));
  const double secs = seconds_since(t0);
  auto c = check_first_run(tr);
  const bool pass = tr.events.empty() && c.constraint && c.tracking && secs < 10.0;
  return {pass, std::to_string(tr.events.size()) + " events, " + c.text + ", " + num(secs) + " s"};
}

Outcome ac2() {
  const auto& sys = fixtures::first_example();
  const std::vector<Expr> constraints{fixtures::first_constraint()};
  std::string first_switch = "none";
  {
    // A zero event budget stops the run at the first switch.
    auto cfg = first_config(-12.0);
    cfg.max_events = 0;
    try {
      sim::run_closed_loop(sys, constraints, Expr(0.0), cfg);
    } catch (const sim::SimulationError& e) {
      first_switch = "t=" + num(e.time());
    }
  }
  try {
    auto tr = sim::run_closed_loop(sys, constraints, Expr(0.0), first_config(-12.0));
    auto c = check_first_run(tr);
    const bool pass = !tr.events.empty() && c.constraint && c.tracking;
    return {pass, std::to_string(tr.events.size()) + " events (first at " + first_switch + "), " + c.text};
  } catch (const sim::SimulationError& e) {
    return {false, "first switch at " + first_switch + ", run aborted at t=" + num(e.time()) + ": " + e.what()};
  }
}

// Closed forms of the first example's eliminated controller and input.
struct FirstOracle {
  double t, x1, x2, xi, beta;
  std::vector<double> K;
  double q() const { return 16 * (t - 0.5) * (t - 0.5) - 2 * x1 - 1; }
  double z1() const { return std::sqrt(q()); }
  double z2() const { return (16 * t - x2 - 8) / z1(); }
  double s() const { return 2 * beta * (1 / (std::exp(-xi) + 1) - 0.5); }
  double sp() const { return 2 * beta * std::exp(-xi) / std::pow(std::exp(-xi) + 1, 2); }
  double pi() const {
    const double ydd = 16 - z2() * z2() - z1() * s();
    const double nu = -(K[0] * x1 + K[1] * x2 + K[2] * ydd);
    return -(3 * z2() * s() + nu) / (z1() * sp());
  }
  double u() const { return x2 + 16 - z2() * z2() - s() * z1(); }
};

Outcome ac3() {
  auto aug = augment::sequential_capture(fixtures::first_example(), {fixtures::first_constraint()}, 0.01,
                                         {0.0, {0.0, -2.0}}, {100.0});
  auto ctrl = fbl::synthesize(aug, Expr(0.0), {-2.9}, 0.01);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  double worst_pi = 0.0, worst_u = 0.0;
  int n = 0;
  while (n < 200) {
    FirstOracle o{0.5 + d(rng), -1.5 + 2 * d(rng), 3 * d(rng), 0.05 * d(rng), 100.0, ctrl.gains.K};
    if (o.q() <= 1e-3) continue;
    Binding b(o.t);
    b.set("x1", o.x1).set("x2", o.x2).set("xi1", o.xi);
    const double pi = symbolic::eval(ctrl.pi, b), u = symbolic::eval(ctrl.u_reconstruction, b);
    worst_pi = std::max(worst_pi, std::fabs(pi - o.pi()) / std::max(1.0, std::fabs(o.pi())));
    worst_u = std::max(worst_u, std::fabs(u - o.u()) / std::max(1.0, std::fabs(o.u())));
    ++n;
  }
  return {worst_pi <= 1e-9 && worst_u <= 1e-9,
          "200 bindings, max rel error pi " + num(worst_pi) + ", u " + num(worst_u)};
}

Outcome ac4() {
  const auto sys = fixtures::lorenz();
  const auto constraints = fixtures::lorenz_constraints();
  const auto ref = fixtures::lorenz_reference();
  sim::RunConfig cfg;
  cfg.t_end = 20.0;
  cfg.betas = {20.0, 20.0};
  cfg.eps = 0.01;
  cfg.poles = {-0.3};
  cfg.integrator.rtol = cfg.integrator.atol = 1e-8;

  auto aug = augment::sequential_capture(sys, constraints, 0.01, {sys.t0, sys.x0}, cfg.betas);
  const double xi1 = aug.stages[0].xi0, xi2 = aug.stages[1].xi0;
  const bool xi_ok = std::fabs(xi1 - 0.0143) <= 1e-3 && std::fabs(xi2 + 0.0388) <= 1e-3;

  auto peak = [](const sim::Trajectory& tr) {
    double m = 0.0;
    for (const auto& x : tr.x) m = std::max(m, std::fabs(x[1]));
    return m;
  };
  auto classical = sim::run_classical_fbl(sys, ref, cfg, constraints);
  const bool overshoot = peak(classical) > 1.2;

  std::string text = "xi(0) [" + num(xi1) + ", " + num(xi2) + "], classical max|x2| " + num(peak(classical));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto tr = sim::run_closed_loop(sys, constraints, ref, cfg);
    const double secs = seconds_since(t0);
    const bool bounded = peak(tr) <= 1.2 + 1e-3;
    text += ", constrained max|x2| " + num(peak(tr)) + ", " + std::to_string(tr.events.size()) + " events, " +
            num(secs) + " s";
    return {xi_ok && overshoot && bounded && secs < 30.0, text};
  } catch (const sim::SimulationError& e) {
    return {false, text + ", constrained run aborted at t=" + num(e.time()) + ": " + e.what()};
  }
}

Outcome ac5() {
  sim::Theorem1Settings st;
  st.starts = 10;
  st.inputs_per_start = 50;
  st.seed = 7;
  st.box = {{-1.0, 0.0}, {-2.0, 2.0}};
  auto rep = sim::random_input_theorem1(fixtures::first_example(), fixtures::first_constraint(), 0.01, st);
  double worst_phi = -1e300, worst_drift = 0.0;
  bool all = true;
  for (const auto& t : rep.trials) {
    worst_phi = std::max(worst_phi, t.max_phi);
    worst_drift = std::max(worst_drift, t.max_drift);
    all = all && t.max_phi <= 1e-6 && t.max_drift < 1e-6;
  }
  return {all && rep.trials.size() == 500,
          std::to_string(rep.trials.size()) + " runs, max phi " + num(worst_phi) + ", max drift " + num(worst_drift)};
}

Outcome ac6() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> d(-4.0, -0.5);
  double worst_eig = 0.0, worst_closed = 0.0;
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> poles(n);
      for (auto& p : poles) p = d(rng);
      auto g = fbl::pole_gains(poles);
      using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
      MatrixXld A = MatrixXld::Zero(n, n);
      for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
      for (int j = 0; j < n; ++j) A(n - 1, j) = -g.K[j];
      auto ev = Eigen::EigenSolver<MatrixXld>(A, false).eigenvalues();
      std::vector<double> got;
      for (int i = 0; i < n; ++i) {
        worst_eig = std::max(worst_eig, std::fabs(static_cast<double>(ev[i].imag())));
        got.push_back(static_cast<double>(ev[i].real()));
      }
      std::sort(got.begin(), got.end());
      std::sort(poles.begin(), poles.end());
      for (int i = 0; i < n; ++i) worst_eig = std::max(worst_eig, std::fabs(got[i] - poles[i]));
      if (n == 3) {
        const double l1 = poles[0], l2 = poles[1], l3 = poles[2];
        worst_closed = std::max({worst_closed, std::fabs(g.K[0] + l1 * l2 * l3),
                                 std::fabs(g.K[1] - (l1 * l2 + l1 * l3 + l2 * l3)), std::fabs(g.K[2] + l1 + l2 + l3)});
      }
    }
  }
  return {worst_eig <= 1e-9 && worst_closed <= 1e-12,
          "120 pole sets, max eigenvalue error " + num(worst_eig) + ", order 3 closed-form error " + num(worst_closed)};
}

Outcome ac7() {
  struct Case {
    std::string name;
    system::InputAffineSystem sys;
    Expr phi;
  };
  std::vector<Case> cases{{"first", fixtures::first_example(), fixtures::first_constraint()}};
  for (std::size_t k = 0; k < 2; ++k) {
    cases.push_back({"lorenz phi" + std::to_string(k + 1), fixtures::lorenz(), fixtures::lorenz_constraints()[k]});
  }
  bool pass = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    auto r = sim::capture_structure_checks(cases[i].sys, cases[i].phi, 0.01, 70 + i, 20);
    pass = pass && r.passed() && r.bindings == 20;
    os << (i ? "; " : "") << cases[i].name << ": zero " << r.zero_at_boundary << "/" << r.bindings << ", beta spread "
       << num(r.beta_spread) << ", delayed " << r.delayed << "/" << r.bindings;
  }
  return {pass, os.str()};
}

Outcome ac8() {
  const double beta = 1.0, eps = 0.2;
  auto aug = augment::sequential_capture(fixtures::first_example(), {fixtures::first_constraint()}, eps,
                                         {0.0, {0.0, -2.0}}, {beta}, system::kDefaultMaxOrder, {0.0});
  auto land = sim::nrd_landscape(aug, {{"t", 0.0, 1.0, 41}, {"x1", -3.0, 0.5, 36}, {"xi1", -2.0, 2.0, 17}},
                                 {{"x2", 0.0}}, eps);
  std::size_t interior = 0, three = 0, misplaced = 0, boundary = 0;
  for (const auto& p : land.points) {
    const double t = p.coords[0], x1 = p.coords[1], xi = p.coords[2];
    const double phi = x1 - 8 * (t - 0.5) * (t - 0.5) + 0.5;
    const double sp = 2 * beta * std::exp(-xi) / std::pow(std::exp(-xi) + 1, 2);
    const double gamma = std::sqrt(std::max(0.0, -2 * phi)) * sp;
    if (p.sigma == sim::kBoundary) {
      ++boundary;
      if (phi < -1e-8) ++misplaced;
      continue;
    }
    if (phi >= 0.0) {
      ++misplaced;
      continue;
    }
    ++interior;
    if (p.sigma == 3) {
      ++three;
    } else if (gamma > eps * (1 + 1e-12)) {
      ++misplaced;
    }
  }
  const double share = interior ? static_cast<double>(three) / interior : 0.0;
  return {interior > 0 && share >= 0.9 && misplaced == 0,
          std::to_string(three) + "/" + std::to_string(interior) + " interior points at 3 (" + num(100 * share) +
              "%), " + std::to_string(boundary) + " boundary, " + std::to_string(misplaced) + " outside the region"};
}

Outcome ac9() {
  auto stats = symbolic::corpus::run_corpus(500, 20240611u);
  return {stats.cases == 500 && stats.failures == 0,
          std::to_string(stats.cases - stats.failures) + "/" + std::to_string(stats.cases) + " cases (" +
              std::to_string(stats.diff_checks) + " derivative, " + std::to_string(stats.value_checks) + " value, " +
              std::to_string(stats.idempotence_checks) + " idempotence, " + std::to_string(stats.roundtrip_checks) +
              " round trip)" + (stats.first_failure.empty() ? "" : ", first failure: " + stats.first_failure)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1 first example, poles -2.9, no switching", ac1},
      {"AC2 first example, poles -12, switching", ac2},
      {"AC3 eliminated controller and input vs closed form", ac3},
      {"AC4 Lorenz tracking with |x2| <= 1.2", ac4},
      {"AC5 random virtual inputs keep the constraint", ac5},
      {"AC6 pole placement", ac6},
      {"AC7 capture structure", ac7},
      {"AC8 relative degree landscape", ac8},
      {"AC9 symbolic corpus", ac9},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
