#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fblc/symbolic/eval.hpp"
#include "fblc/symbolic/parser.hpp"
#include "fblc/system/lie.hpp"
#include "fixtures.hpp"

namespace fblc::system {
namespace {

using symbolic::Binding;
using symbolic::parse_expr;

Expr P(const std::string& text, const std::vector<std::string>& xs = {"x1", "x2", "x3"}) {
  return symbolic::simplify(parse_expr(text, xs));
}

TEST(LieF, FirstOrderOfConstraint) {
  auto sys = fixtures::first_example();
  EXPECT_EQ(lie_f(sys, fixtures::first_constraint(), 1), P("x2 - 16*(t-0.5)"));
}

TEST(LieF, SecondOrderOfConstraint) {
  auto sys = fixtures::first_example();
  EXPECT_EQ(lie_f(sys, fixtures::first_constraint(), 2), P("-x2 - 16"));
}

TEST(LieF, ConstantHasNoDerivative) {
  auto sys = fixtures::lorenz();
  for (int j = 1; j <= 3; ++j) EXPECT_TRUE(lie_f(sys, Expr(4.5), j).is_zero());
  EXPECT_TRUE(lie_f(sys, Expr(4.5), 0).is_constant(4.5));
}

TEST(LieG, FirstExampleCoefficients) {
  auto sys = fixtures::first_example();
  auto phi = fixtures::first_constraint();
  EXPECT_TRUE(lie_g_lie_f(sys, phi, 0).front().is_zero());
  EXPECT_TRUE(lie_g_lie_f(sys, phi, 1).front().is_one());
}

TEST(LieG, LorenzOutput) {
  auto sys = fixtures::lorenz();
  EXPECT_TRUE(lie_g_lie_f(sys, sys.output.front(), 0).front().is_one());
}

TEST(RelativeDegree, Constraint) {
  auto r = relative_degree(fixtures::first_example(), fixtures::first_constraint());
  ASSERT_TRUE(r.defined());
  EXPECT_EQ(*r.order, 2);
}

TEST(RelativeDegree, DirectlyActuated) {
  auto sys = parse_system({{"x1"}, {"u"}, {"0"}, {{"1"}}, {"x1"}, {0.0}, 0.0});
  auto r = relative_degree(sys, sys.output.front());
  ASSERT_TRUE(r.defined());
  EXPECT_EQ(*r.order, 1);
}

TEST(RelativeDegree, CoefficientVanishingOnSubset) {
  auto sys = parse_system({{"x1", "x2"}, {"u"}, {"x2", "0"}, {{"0"}, {"x1"}}, {"x2"}, {0.0, 0.0}, 0.0});
  auto r = relative_degree(sys, sys.output.front());
  EXPECT_FALSE(r.defined());
  EXPECT_NE(r.reason.find("vanishes"), std::string::npos);
}

TEST(RelativeDegree, NoInputReachesOutput) {
  auto sys = parse_system({{"x1", "x2"}, {"u"}, {"-x1", "0"}, {{"0"}, {"1"}}, {"x1"}, {0.0, 0.0}, 0.0});
  EXPECT_FALSE(relative_degree(sys, sys.output.front(), 5).defined());
}

TEST(EpsNrd, ConstraintAtInitialState) {
  auto sys = fixtures::first_example();
  auto r = eps_nrd(sys, fixtures::first_constraint(), 0.01, {0.0, {0.0, -2.0}});
  EXPECT_EQ(r.order, 2);
  ASSERT_EQ(r.lie_g_chain.size(), 2u);
  ASSERT_EQ(r.magnitudes.size(), 2u);
  EXPECT_EQ(r.magnitudes[0], 0.0);
  EXPECT_EQ(r.magnitudes[1], 1.0);
  EXPECT_EQ(r.lie_f_chain.size(), 3u);
  EXPECT_EQ(r.lie_f_chain[2], P("-x2 - 16"));
}

TEST(EpsNrd, DirectInputBelowOne) {
  auto sys = parse_system({{"x1"}, {"u"}, {"0"}, {{"1"}}, {"x1"}, {0.0}, 0.0});
  for (double eps : {1e-6, 0.3, 0.999}) EXPECT_EQ(eps_nrd(sys, sys.output.front(), eps, {0.0, {2.0}}).order, 1);
}

TEST(EpsNrd, ComparisonIsStrict) {
  auto sys = parse_system({{"x1"}, {"u"}, {"0"}, {{"1"}}, {"x1"}, {0.0}, 0.0});
  EXPECT_THROW(eps_nrd(sys, sys.output.front(), 1.0, {0.0, {2.0}}, 4), NrdError);
}

TEST(EpsNrd, ThresholdAboveEveryCoefficient) {
  auto sys = fixtures::first_example();
  try {
    eps_nrd(sys, fixtures::first_constraint(), 2.0, {0.0, {0.0, -2.0}}, 6);
    FAIL() << "expected failure";
  } catch (const NrdError& e) {
    EXPECT_NE(std::string(e.what()).find("no numerical relative degree up to max_order 6"), std::string::npos);
  }
}

TEST(EpsNrd, SequenceEntriesApplyPerOrder) {
  // L_g psi = 0.1, L_g L_f psi = 1.
  auto sys = parse_system({{"x1", "x2"}, {"u"}, {"x2", "0"}, {{"0"}, {"1"}}, {"x1"}, {0.0, 0.0}, 0.0});
  Expr psi = P("x1 + 0.1*x2", {"x1", "x2"});
  EXPECT_EQ(eps_nrd(sys, psi, EpsilonSequence({0.01, 0.01}), {0.0, {0.0, 0.0}}).order, 1);
  EXPECT_EQ(eps_nrd(sys, psi, EpsilonSequence({0.2, 0.01}), {0.0, {0.0, 0.0}}).order, 2);
}

TEST(EpsNrd, MonotoneInThreshold) {
  auto sys = fixtures::lorenz();
  Expr psi = P("x2*x1 - 0.3*x3 + 0.05*x2");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  const std::vector<double> eps_grid{1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.5, 1.0, 5.0, 20.0};
  for (int trial = 0; trial < 20; ++trial) {
    AnchorPoint a{d(rng), {d(rng), d(rng), d(rng)}};
    int previous = 0;
    for (double eps : eps_grid) {
      int order = std::numeric_limits<int>::max();
      try {
        order = eps_nrd(sys, psi, eps, a, 6).order;
      } catch (const NrdError&) {
      }
      EXPECT_GE(order, previous);
      previous = order;
    }
  }
}

TEST(EpsNrd, AgreesWithRelativeDegreeAsThresholdVanishes) {
  auto sys = fixtures::first_example();
  auto phi = fixtures::first_constraint();
  auto rd = relative_degree(sys, phi);
  ASSERT_TRUE(rd.defined());
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(eps_nrd(sys, phi, 1e-12, {d(rng), {d(rng), d(rng)}}).order, *rd.order);
  }
}

TEST(Lie, ChainRuleAlongTrajectory) {
  auto sys = fixtures::lorenz();
  Expr psi = P("x1*x2 + t*x3 + sin(x2)");
  Expr lf = lie_f(sys, psi, 1);
  Expr lg = lie_g(sys, psi).front();
  auto input = [](double t) { return std::sin(3.0 * t); };
  auto rhs = [&](double t, const std::vector<double>& x) {
    Binding b = sys.binding(t, x);
    std::vector<double> dx(3);
    for (int i = 0; i < 3; ++i) dx[i] = symbolic::eval(sys.drift[i], b) + symbolic::eval(sys.input_map[i][0], b) * input(t);
    return dx;
  };
  auto rk4 = [&](double t, std::vector<double> x, double h) {
    auto k1 = rhs(t, x);
    std::vector<double> y(3);
    for (int i = 0; i < 3; ++i) y[i] = x[i] + 0.5 * h * k1[i];
    auto k2 = rhs(t + 0.5 * h, y);
    for (int i = 0; i < 3; ++i) y[i] = x[i] + 0.5 * h * k2[i];
    auto k3 = rhs(t + 0.5 * h, y);
    for (int i = 0; i < 3; ++i) y[i] = x[i] + h * k3[i];
    auto k4 = rhs(t + h, y);
    for (int i = 0; i < 3; ++i) x[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    return x;
  };
  std::vector<double> x{0.1, 1.0, 15.0};
  double t = 0.0;
  const double h = 1e-4;
  for (int step = 0; step < 5; ++step) {
    for (int k = 0; k < 1000; ++k) {
      x = rk4(t, x, h);
      t += h;
    }
    auto fwd = rk4(t, x, h);
    auto bwd = rk4(t, x, -h);
    double dpsi = (symbolic::eval(psi, sys.binding(t + h, fwd)) - symbolic::eval(psi, sys.binding(t - h, bwd))) / (2 * h);
    Binding b = sys.binding(t, x);
    double predicted = symbolic::eval(lf, b) + symbolic::eval(lg, b) * input(t);
    EXPECT_NEAR(dpsi, predicted, 1e-5 * std::max(1.0, std::fabs(predicted)));
  }
}

TEST(System, RejectsUnknownSymbol) {
  InputAffineSystem sys = fixtures::first_example();
  sys.drift[0] = Expr::variable("q");
  EXPECT_THROW(sys.validate(), SystemError);
}

TEST(System, RejectsDimensionMismatch) {
  InputAffineSystem sys = fixtures::first_example();
  sys.x0.push_back(1.0);
  EXPECT_THROW(sys.validate(), SystemError);
}

TEST(System, RejectsInputInDynamics) {
  EXPECT_THROW(parse_system({{"x1"}, {"u"}, {"u"}, {{"1"}}, {"x1"}, {0.0}, 0.0}), symbolic::UndeclaredSymbol);
}

TEST(Epsilon, ScalarBroadcastsAndShortListRepeats) {
  EpsilonSequence s(0.3);
  EXPECT_EQ(s[0], 0.3);
  EXPECT_EQ(s[7], 0.3);
  EpsilonSequence v({0.1, 0.2});
  EXPECT_EQ(v[1], 0.2);
  EXPECT_EQ(v[5], 0.2);
  EXPECT_THROW(EpsilonSequence(std::vector<double>{0.1, -1.0}), std::invalid_argument);
}

}  // namespace
}  // namespace fblc::system
