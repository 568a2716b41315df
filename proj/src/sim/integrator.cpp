#include <algorithm>
#include <cmath>
#include <cstring>

#include "fblc/sim/sim.hpp"

namespace fblc::sim {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kAlpha = 0.7 / 5;
constexpr double kBeta = 0.4 / 5;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

double min_step(double t) { return 1e-14 * std::max(1.0, std::fabs(t)); }

}  // namespace

Stepper::Stepper(VectorField rhs, std::size_t dim, IntegratorSettings settings)
    : rhs_(std::move(rhs)), n_(dim), cfg_(settings), k_(7, std::vector<double>(dim)), tmp_(dim), y5_(dim),
      err_(dim), fsal_(dim), fsal_x_(dim) {}

bool Stepper::stages(double t, std::span<const double> x, double h) {
  const std::size_t n = n_;
  auto& k = k_;
  try {
    if (have_fsal_ && fsal_t_ == t && std::memcmp(fsal_x_.data(), x.data(), n * sizeof(double)) == 0) {
      k[0] = fsal_;
    } else {
      rhs_(t, x, k[0]);
    }
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * a21 * k[0][i];
    rhs_(t + c2 * h, tmp_, k[1]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
    rhs_(t + c3 * h, tmp_, k[2]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
    rhs_(t + c4 * h, tmp_, k[3]);
    for (std::size_t i = 0; i < n; ++i) {
      tmp_[i] = x[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
    }
    rhs_(t + c5 * h, tmp_, k[4]);
    for (std::size_t i = 0; i < n; ++i) {
      tmp_[i] = x[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] + a65 * k[4][i]);
    }
    rhs_(t + h, tmp_, k[5]);
    for (std::size_t i = 0; i < n; ++i) {
      y5_[i] = x[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] + b6 * k[5][i]);
    }
    rhs_(t + h, y5_, k[6]);
  } catch (const symbolic::DomainError& e) {
    last_failure_ = e.what();
    return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y5_[i]) || !std::isfinite(k[6][i])) {
      last_failure_ = "non-finite state";
      return false;
    }
  }
  return true;
}

Stepper::Result Stepper::attempt(double t, std::span<const double> x, double h, std::span<double> x_out) {
  Result r;
  if (!stages(t, x, h)) {
    r.error = std::numeric_limits<double>::infinity();
    r.next_h = h * 0.25;
    return r;
  }
  const auto& k = k_;
  double sum = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double e = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
    double sc = cfg_.atol + cfg_.rtol * std::max(std::fabs(x[i]), std::fabs(y5_[i]));
    sum += (e / sc) * (e / sc);
  }
  const double err = std::sqrt(sum / static_cast<double>(n_));
  r.error = err;
  if (err <= 1.0) {
    double fac = err == 0.0 ? kMaxFactor : kSafety * std::pow(err, -kAlpha) * std::pow(previous_error_, kBeta);
    fac = std::clamp(fac, kMinFactor, kMaxFactor);
    previous_error_ = std::max(err, 1e-4);
    r.accepted = true;
    r.next_h = std::min(h * fac, cfg_.max_step);
    std::copy(y5_.begin(), y5_.end(), x_out.begin());
    fsal_ = k[6];
    fsal_t_ = t + h;
    std::copy(y5_.begin(), y5_.end(), fsal_x_.begin());
    have_fsal_ = true;
  } else {
    r.next_h = h * std::max(kMinFactor, kSafety * std::pow(err, -1.0 / 5));
  }
  return r;
}

void Stepper::advance(double t, std::span<const double> x, double h, std::span<double> x_out) {
  const bool saved = have_fsal_;
  have_fsal_ = false;
  const bool ok = stages(t, x, h);
  have_fsal_ = saved;
  if (!ok) throw symbolic::DomainError(last_failure_, "resampled step");
  std::copy(y5_.begin(), y5_.end(), x_out.begin());
}

double Stepper::initial_step(double t, std::span<const double> x, double t_end) {
  if (cfg_.initial_step > 0.0) return std::min(cfg_.initial_step, t_end - t);
  std::vector<double> f(n_);
  try {
    rhs_(t, x, f);
  } catch (const symbolic::DomainError&) {
    return std::min(1e-6, t_end - t);
  }
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double sc = cfg_.atol + cfg_.rtol * std::fabs(x[i]);
    d0 += (x[i] / sc) * (x[i] / sc);
    d1 += (f[i] / sc) * (f[i] / sc);
  }
  d0 = std::sqrt(d0 / n_);
  d1 = std::sqrt(d1 / n_);
  double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  return std::min({h, cfg_.max_step, t_end - t});
}

Samples integrate(const VectorField& rhs, std::vector<double> x0, double t0, double t1, const IntegratorSettings& cfg) {
  if (!(t1 >= t0)) throw std::invalid_argument("integrate: end time before start time");
  Samples out;
  out.t.push_back(t0);
  out.x.push_back(x0);
  if (t1 == t0) return out;
  Stepper stepper(rhs, x0.size(), cfg);
  std::vector<double> x = std::move(x0), next(x.size());
  double t = t0;
  double h = stepper.initial_step(t, x, t1);
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > cfg.max_steps) throw SimulationError("step limit reached at t = " + fbl::format_number(t), t);
    const bool last = h >= t1 - t;
    const double step = last ? t1 - t : h;
    auto r = stepper.attempt(t, x, step, next);
    if (!r.accepted) {
      h = r.next_h;
      if (h < min_step(t)) {
        throw SimulationError("step size underflow at t = " + fbl::format_number(t) + ": " + stepper.last_failure(), t);
      }
      continue;
    }
    t = last ? t1 : t + step;
    x.swap(next);
    out.t.push_back(t);
    out.x.push_back(x);
    h = r.next_h;
  }
  return out;
}

}  // namespace fblc::sim
