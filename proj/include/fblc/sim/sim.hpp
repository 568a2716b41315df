#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fblc/fbl/fbl.hpp"

namespace fblc::sim {

using symbolic::Expr;
using system::InputAffineSystem;

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& msg, double t) : std::runtime_error(msg), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

struct IntegratorSettings {
  double rtol = 1e-8;
  double atol = 1e-8;
  double max_step = 0.05;
  double initial_step = 0.0;  // 0 picks one from the initial derivative
  std::size_t max_steps = 5'000'000;
};

struct RunConfig {
  double t_end = 1.0;
  IntegratorSettings integrator;
  system::EpsilonSequence eps{0.01};
  std::vector<double> betas{100.0};
  std::vector<double> poles{-1.0};
  double event_tolerance = 1e-9;
  int max_order = system::kDefaultMaxOrder;
  std::size_t max_events = 200;
  std::vector<double> xi0;  // empty: zero offset for the first controller
  void validate(double t0) const;
};

// x' = rhs(t, x). May throw symbolic::DomainError, which rejects the step.
using VectorField = std::function<void(double, std::span<const double>, std::span<double>)>;

// Dormand-Prince 5(4) pair with PI step size control.
class Stepper {
 public:
  Stepper(VectorField rhs, std::size_t dim, IntegratorSettings settings);

  struct Result {
    bool accepted = false;
    double error = 0.0;   // scaled error norm
    double next_h = 0.0;  // proposal for the following step
  };
  // One attempt from (t, x) with size h. On acceptance x_out holds the new state.
  Result attempt(double t, std::span<const double> x, double h, std::span<double> x_out);
  // Fixed size step without error control, used to resample inside an accepted step.
  void advance(double t, std::span<const double> x, double h, std::span<double> x_out);
  double initial_step(double t, std::span<const double> x, double t_end);
  void reset() { have_fsal_ = false; previous_error_ = 1e-4; }
  const std::string& last_failure() const { return last_failure_; }

 private:
  bool stages(double t, std::span<const double> x, double h);

  VectorField rhs_;
  std::size_t n_;
  IntegratorSettings cfg_;
  std::vector<std::vector<double>> k_;
  std::vector<double> tmp_, y5_, err_, fsal_;
  bool have_fsal_ = false;
  double fsal_t_ = 0.0;
  std::vector<double> fsal_x_;
  double previous_error_ = 1e-4;
  std::string last_failure_;
};

struct Samples {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
};

// Accepted steps from t0 to t1, both endpoints included.
Samples integrate(const VectorField& rhs, std::vector<double> x0, double t0, double t1, const IntegratorSettings& cfg);

struct Event {
  double t = 0.0;
  std::string from;
  std::string to;
  std::vector<std::string> reasons;
};

struct Trajectory {
  std::vector<std::string> state_names;  // original states then integral states
  std::size_t original_count = 0;
  std::size_t constraint_count = 0;
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  std::vector<double> u, y, y_ref;
  std::vector<std::vector<double>> phi;  // per row, per constraint
  std::vector<std::string> event_marks;  // per row, empty or the new signature
  std::vector<Event> events;
  std::vector<std::string> signatures;  // every controller used, in order of first use
  std::size_t syntheses = 0;

  std::size_t size() const { return t.size(); }
  std::string csv_header() const;
  std::string to_csv() const;
  double max_phi() const;
  double final_tracking_error() const;
};

// Sequential capture, synthesis and simulation with re-synthesis on switching.
Trajectory run_closed_loop(const InputAffineSystem& sys, const std::vector<Expr>& constraints, const Expr& y_r,
                           const RunConfig& cfg);

// Same pipeline without constraint capture. Constraints are only evaluated
// for reporting.
Trajectory run_classical_fbl(const InputAffineSystem& sys, const Expr& y_r, const RunConfig& cfg,
                             const std::vector<Expr>& report_constraints = {});

// Open loop run of any system with input w(t, x).
using InputSignal = std::function<double(double, std::span<const double>)>;
Samples simulate_open_loop(const InputAffineSystem& sys, const InputSignal& w, double t1, const IntegratorSettings& cfg);

struct ConstraintReport {
  std::vector<double> max_phi;
  double tolerance = 0.0;
  bool passed = true;
};
ConstraintReport verify_constraints(const Trajectory& traj, double tol);

struct ConservationReport {
  std::vector<double> max_drift;     // per stage, |phi + z^2/2 - initial value|
  std::vector<double> max_phi;       // per stage
  std::vector<double> max_recovery;  // per stage, |z recovered - z integrated|
};
// Samples of the captured system aug.base (slack states integrated).
ConservationReport verify_conservation(const Samples& samples, const augment::AugmentedSystem& aug);

struct Theorem1Trial {
  std::vector<double> start;
  double max_phi = 0.0;
  double max_drift = 0.0;
  bool passed = false;
};
struct Theorem1Report {
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  std::vector<Theorem1Trial> trials;
  std::size_t passed() const;
};

struct Theorem1Settings {
  std::size_t starts = 10;
  std::size_t inputs_per_start = 50;
  double input_bound = 5.0;
  double piece_length = 0.1;
  double horizon = 1.0;
  double tolerance = 1e-6;
  std::uint64_t seed = 1;
  IntegratorSettings integrator{1e-10, 1e-10, 0.05, 0.0, 5'000'000};
  // Sampling interval for each original state; [-1, 1] when empty.
  std::vector<std::pair<double, double>> box;
};
Theorem1Report random_input_theorem1(const InputAffineSystem& sys, const Expr& phi, const system::EpsilonSequence& eps,
                                     const Theorem1Settings& settings);

// Structural checks of the capture on one constraint at random bindings near
// the initial point: the output's input coefficient vanishes where the slack
// is zero, the integral coefficient scales linearly with beta, and integral
// wrapping delays the first significant coefficient by one order.
struct StructureReport {
  std::size_t bindings = 0;
  int plain_order = 0;            // first structurally nonzero coefficient order
  std::size_t zero_at_boundary = 0;
  double beta_spread = 0.0;       // max relative spread of coefficient / beta
  std::size_t delayed = 0;
  double tolerance = 1e-9;
  bool passed() const;
};
StructureReport capture_structure_checks(const InputAffineSystem& sys, const Expr& phi, const system::EpsilonSequence& eps,
                               std::uint64_t seed, std::size_t bindings = 20);

// pi against w_tilde with slacks recovered from the original coordinates.
struct EliminationReport {
  std::size_t bindings = 0;
  double max_relative_error = 0.0;
  bool passed(double tol = 1e-9) const { return bindings > 0 && max_relative_error <= tol; }
};
EliminationReport check_elimination(const fbl::SynthesizedController& ctrl, std::uint64_t seed,
                                    std::size_t bindings = 100);

struct GridAxis {
  std::string name;  // "t", an original state or an integral state
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 1;
};

inline constexpr int kBoundary = -1;  // infeasible or guarded point
inline constexpr int kNoOrder = 0;    // no coefficient above threshold up to max_order

struct LandscapePoint {
  std::vector<double> coords;  // one per axis
  int sigma = kNoOrder;
  double margin = 0.0;  // max_k phi_k at the point
};

struct Landscape {
  std::vector<GridAxis> axes;
  std::vector<LandscapePoint> points;
  std::string to_csv() const;
};

// Output epsilon numerical relative degree of aug.base over a grid. Values
// not on an axis come from `fixed` (t, original states, integral states).
Landscape nrd_landscape(const augment::AugmentedSystem& aug, const std::vector<GridAxis>& axes,
                        const std::map<std::string, double>& fixed_values, const system::EpsilonSequence& eps,
                        int max_order = system::kDefaultMaxOrder);

}  // namespace fblc::sim
