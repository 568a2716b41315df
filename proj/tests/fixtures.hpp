#pragma once

#include "fblc/symbolic/parser.hpp"
#include "fblc/system/input_affine_system.hpp"

namespace fblc::fixtures {

inline system::InputAffineSystem first_example() {
  return system::parse_system({{"x1", "x2"}, {"u"}, {"x2", "-x2"}, {{"0"}, {"1"}}, {"x1"}, {0.0, -2.0}, 0.0});
}

inline symbolic::Expr first_constraint() {
  return symbolic::simplify(symbolic::parse_expr("x1 - 8*(t-0.5)^2 + 0.5", {"x1", "x2"}));
}

inline system::InputAffineSystem lorenz() {
  return system::parse_system({{"x1", "x2", "x3"},
                               {"u"},
                               {"10*(x2 - x1)", "28*x1 - x2 - x1*x3", "x1*x2 - 8/3*x3"},
                               {{"0"}, {"1"}, {"0"}},
                               {"x2"},
                               {0.1, 1.0, 15.0},
                               0.0});
}

inline std::vector<symbolic::Expr> lorenz_constraints() {
  const std::vector<std::string> xs{"x1", "x2", "x3"};
  return {symbolic::simplify(symbolic::parse_expr("-x2 - 1.2", xs)),
          symbolic::simplify(symbolic::parse_expr("x2 - 1.2", xs))};
}

inline symbolic::Expr lorenz_reference() {
  return symbolic::simplify(symbolic::parse_expr("0.6*(sin(1.5*t) - cos(1.3*t))", {}));
}

}  // namespace fblc::fixtures
