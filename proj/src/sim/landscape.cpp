#include <cmath>
#include <sstream>

#include "fblc/sim/sim.hpp"

namespace fblc::sim {

using symbolic::CompiledExpr;
using symbolic::DomainError;

namespace {

// Output input-coefficients of increasing order, eliminated and compiled on
// first use.
class LazyChain {
 public:
  LazyChain(const augment::AugmentedSystem& aug, std::vector<std::string> vars)
      : aug_(aug), vars_(std::move(vars)), current_(aug.base.output.front()) {}

  const CompiledExpr& coefficient(std::size_t i) {
    while (compiled_.size() <= i) {
      Expr coef = aug_.eliminate(system::lie_g(aug_.base, current_).front());
      compiled_.push_back(std::make_unique<CompiledExpr>(std::vector<Expr>{coef}, vars_));
      current_ = system::lie_derivative(aug_.base, current_);
    }
    return *compiled_[i];
  }

 private:
  const augment::AugmentedSystem& aug_;
  std::vector<std::string> vars_;
  Expr current_;
  std::vector<std::unique_ptr<CompiledExpr>> compiled_;
};

}  // namespace

Landscape nrd_landscape(const augment::AugmentedSystem& aug, const std::vector<GridAxis>& axes,
                        const std::map<std::string, double>& fixed_values, const system::EpsilonSequence& eps,
                        int max_order) {
  std::vector<std::string> vars = aug.original.variables();
  const auto xi = aug.integral_states();
  vars.insert(vars.end(), xi.begin(), xi.end());

  std::vector<double> base(vars.size(), 0.0);
  std::vector<bool> bound(vars.size(), false);
  auto slot = [&](const std::string& name) {
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i] == name) return i;
    }
    throw std::invalid_argument("landscape: unknown variable '" + name + "'");
  };
  for (const auto& [name, v] : fixed_values) {
    base[slot(name)] = v;
    bound[slot(name)] = true;
  }
  std::vector<std::size_t> axis_slots;
  for (const auto& a : axes) {
    if (a.count == 0) throw std::invalid_argument("landscape: axis '" + a.name + "' has no points");
    axis_slots.push_back(slot(a.name));
    bound[axis_slots.back()] = true;
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (!bound[i]) throw std::invalid_argument("landscape: no value for '" + vars[i] + "'");
  }

  std::vector<Expr> constraints, slacks;
  for (const auto& st : aug.stages) constraints.push_back(st.constraint);
  for (const auto& st : aug.stages) slacks.push_back(st.recovery_original.front());
  CompiledExpr constraint_prog(constraints, vars);
  CompiledExpr slack_prog(slacks, vars);
  const std::size_t r = aug.stages.size();
  LazyChain chain(aug, vars);

  Landscape out;
  out.axes = axes;
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.count;
  std::vector<double> in = base;
  for (std::size_t idx = 0; idx < total; ++idx) {
    LandscapePoint p;
    std::size_t rem = idx;
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& ax = axes[a];
      const std::size_t k = rem % ax.count;
      rem /= ax.count;
      const double v = ax.count == 1 ? ax.lo : ax.lo + (ax.hi - ax.lo) * static_cast<double>(k) / (ax.count - 1);
      in[axis_slots[a]] = v;
    }
    for (std::size_t a = 0; a < axes.size(); ++a) p.coords.push_back(in[axis_slots[a]]);

    p.margin = -std::numeric_limits<double>::infinity();
    bool guarded = false;
    for (std::size_t k = 0; k < r; ++k) p.margin = std::max(p.margin, constraint_prog.evaluate_one(in, k));
    if (r > 0 && !(p.margin < -augment::kFeasibilityMargin)) guarded = true;
    for (std::size_t k = 0; k < r && !guarded; ++k) {
      try {
        if (slack_prog.evaluate_one(in, k) < augment::kSlackGuard) guarded = true;
      } catch (const DomainError&) {
        guarded = true;
      }
    }
    if (guarded) {
      p.sigma = kBoundary;
    } else {
      p.sigma = kNoOrder;
      for (int i = 0; i < max_order; ++i) {
        double v = 0.0;
        try {
          v = chain.coefficient(static_cast<std::size_t>(i)).evaluate_one(in);
        } catch (const DomainError&) {
          p.sigma = kBoundary;
          break;
        }
        if (std::fabs(v) > eps[static_cast<std::size_t>(i)]) {
          p.sigma = i + 1;
          break;
        }
      }
    }
    out.points.push_back(std::move(p));
  }
  return out;
}

std::string Landscape::to_csv() const {
  std::ostringstream os;
  for (const auto& a : axes) os << a.name << ",";
  os << "sigma,margin\n";
  for (const auto& p : points) {
    for (double c : p.coords) os << fbl::format_number(c) << ",";
    if (p.sigma == kBoundary) {
      os << "boundary";
    } else if (p.sigma == kNoOrder) {
      os << "none";
    } else {
      os << p.sigma;
    }
    os << "," << fbl::format_number(p.margin) << "\n";
  }
  return os.str();
}

}  // namespace fblc::sim
