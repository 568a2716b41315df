#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fblc/augment/augment.hpp"
#include "fblc/symbolic/eval.hpp"
#include "fblc/symbolic/parser.hpp"
#include "fixtures.hpp"

namespace fblc::augment {
namespace {

using symbolic::Binding;

const std::vector<std::string> kNames{"x1", "x2", "x3", "z1", "dz1", "ddz1", "w1", "u", "xi1"};

Expr P(const std::string& text) { return symbolic::simplify(symbolic::parse_expr(text, kNames)); }

AugmentedSystem first_captured() {
  return capture(fixtures::first_example(), fixtures::first_constraint(), 0.01, {0.0, {0.0, -2.0}});
}

// Hand-derived slack and input expressions for the first example.
struct FirstOracle {
  double t, x1, x2, xi, beta;
  double q() const { return 16 * (t - 0.5) * (t - 0.5) - 2 * x1 - 1; }
  double z1() const { return std::sqrt(q()); }
  double z2() const { return (16 * t - x2 - 8) / z1(); }
  double s() const { return 2 * beta * (1 / (std::exp(-xi) + 1) - 0.5); }
  double u() const { return x2 + 16 - std::pow(16 * t - x2 - 8, 2) / q() - s() * std::sqrt(q()); }
};

TEST(Leibniz, FirstExampleChain) {
  auto sys = fixtures::first_example();
  auto chain = leibniz_chain(sys, fixtures::first_constraint(), 2, {"z1", "dz1"}, "ddz1");
  ASSERT_EQ(chain.size(), 3u);
  EXPECT_EQ(chain[0], P("x1 - 8*(t-0.5)^2 + 0.5 + 0.5*z1^2"));
  EXPECT_EQ(chain[1], P("x2 - 16*(t-0.5) + z1*dz1"));
  EXPECT_EQ(chain[2], P("u - x2 - 16 + dz1^2 + z1*ddz1"));
}

TEST(Leibniz, HigherOrderRemainder) {
  // phi = x1 with a chain of four integrators: d^4/dt^4 (z^2/2) = z z'''' + 4 z' z''' + 3 z''^2.
  auto sys = system::parse_system({{"x1", "x2", "x3", "x4"}, {"u"}, {"x2", "x3", "x4", "0"},
                                   {{"0"}, {"0"}, {"0"}, {"1"}}, {"x1"}, {0, 0, 0, 0}, 0.0});
  auto chain = leibniz_chain(sys, Expr::variable("x1"), 4, {"a0", "a1", "a2", "a3"}, "a4");
  auto expected = symbolic::simplify(symbolic::parse_expr("u + a0*a4 + 4*a1*a3 + 3*a2^2", {"a0", "a1", "a2", "a3", "a4", "u"}));
  EXPECT_EQ(chain[4], expected);
}

TEST(Capture, FirstExampleDynamics) {
  auto aug = first_captured();
  const auto& sys = aug.base;
  ASSERT_EQ(sys.states, (std::vector<std::string>{"x1", "x2", "z1", "dz1"}));
  EXPECT_EQ(sys.inputs, std::vector<std::string>{"w1"});
  EXPECT_EQ(sys.drift[0], P("x2"));
  EXPECT_EQ(sys.drift[1], P("16 - dz1^2"));
  EXPECT_EQ(sys.input_map[1][0], P("-z1"));
  EXPECT_EQ(sys.drift[2], P("dz1"));
  EXPECT_TRUE(sys.drift[3].is_zero());
  EXPECT_TRUE(sys.input_map[3][0].is_one());
  EXPECT_EQ(aug.input_reconstruction, P("x2 + 16 - dz1^2 - z1*w1"));
  EXPECT_EQ(aug.stages.front().order, 2);
}

TEST(Capture, InitialSlackValues) {
  auto aug = first_captured();
  ASSERT_EQ(aug.base.x0.size(), 4u);
  EXPECT_NEAR(aug.base.x0[2], std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(aug.base.x0[3], -2 * std::sqrt(3.0), 1e-14);
}

TEST(Capture, RecoveryExpressions) {
  auto aug = first_captured();
  const auto& rec = aug.stages.front().recovery_original;
  ASSERT_EQ(rec.size(), 2u);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    FirstOracle o{d(rng), d(rng) - 2.0, d(rng), 0.0, 1.0};
    if (o.q() <= 1e-3) continue;
    Binding b(o.t);
    b.set("x1", o.x1).set("x2", o.x2);
    EXPECT_NEAR(symbolic::eval(rec[0], b), o.z1(), 1e-12 * (1 + o.z1()));
    EXPECT_NEAR(symbolic::eval(rec[1], b), o.z2(), 1e-10 * (1 + std::fabs(o.z2())));
  }
}

TEST(Capture, BoundaryAnchorRejected) {
  try {
    capture(fixtures::first_example(), fixtures::first_constraint(), 0.01, {0.0, {1.5, 0.0}});
    FAIL() << "expected rejection";
  } catch (const InfeasibleAnchor& e) {
    EXPECT_NE(std::string(e.what()).find("infeasible anchor"), std::string::npos);
  }
}

TEST(Capture, InputColumnVanishesWithSlack) {
  auto aug = first_captured();
  Binding b(0.3);
  b.set("x1", -1.0).set("x2", 0.4).set("z1", 0.0).set("dz1", 2.0);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(symbolic::eval(aug.base.input_map[i][0], b), 0.0);
}

TEST(Sigmoid, ZeroAndInverse) {
  EXPECT_EQ(bounded_sigmoid_value(0.0, 7.0), 0.0);
  EXPECT_EQ(bounded_sigmoid_inverse(0.0, 7.0), 0.0);
  for (double y : {-6.9, -1.0, 0.3, 5.5}) EXPECT_NEAR(bounded_sigmoid_value(bounded_sigmoid_inverse(y, 7.0), 7.0), y, 1e-12);
  Binding b;
  b.set("xi1", 0.7);
  EXPECT_NEAR(symbolic::eval(bounded_sigmoid(Expr::variable("xi1"), 3.0), b), bounded_sigmoid_value(0.7, 3.0), 1e-15);
  const double h = 1e-6;
  double fd = (bounded_sigmoid_value(0.7 + h, 3.0) - bounded_sigmoid_value(0.7 - h, 3.0)) / (2 * h);
  EXPECT_NEAR(symbolic::eval(bounded_sigmoid_derivative(Expr::variable("xi1"), 3.0), b), fd, 1e-8);
}

TEST(Sigmoid, InverseOutsideBound) {
  try {
    bounded_sigmoid_inverse(2.5, 2.0);
    FAIL() << "expected failure";
  } catch (const InputBoundInfeasible& e) {
    EXPECT_EQ(e.required_beta(), 2.5);
  }
}

TEST(Integralize, FirstExampleSystem) {
  const double beta = 100.0;
  auto aug = integralize(first_captured(), beta);
  const auto& sys = aug.base;
  ASSERT_EQ(sys.states, (std::vector<std::string>{"x1", "x2", "z1", "dz1", "xi1"}));
  EXPECT_EQ(sys.inputs, std::vector<std::string>{"wt1"});
  Binding b(0.2);
  b.set("x1", -1.0).set("x2", 0.5).set("z1", 1.3).set("dz1", -0.4).set("xi1", 0.02);
  const double s = bounded_sigmoid_value(0.02, beta);
  EXPECT_NEAR(symbolic::eval(sys.drift[1], b), 16 - 0.16 - 1.3 * s, 1e-12);
  EXPECT_NEAR(symbolic::eval(sys.drift[3], b), s, 1e-12);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_TRUE(sys.input_map[i][0].is_zero());
  EXPECT_TRUE(sys.input_map[4][0].is_one());
  const double r3 = std::sqrt(3.0);
  EXPECT_NEAR(sys.x0[4], std::log((3 * beta + 2 * r3) / (3 * beta - 2 * r3)), 1e-14);
}

TEST(Integralize, OffsetFormulaAcrossBeta) {
  const double r3 = std::sqrt(3.0);
  for (double beta : {2.0, 5.0, 40.0}) {
    auto aug = integralize(first_captured(), beta);
    EXPECT_NEAR(aug.stages.front().xi0, std::log((3 * beta + 2 * r3) / (3 * beta - 2 * r3)), 1e-13);
  }
  EXPECT_THROW(integralize(first_captured(), 1.0), InputBoundInfeasible);
  EXPECT_NO_THROW(integralize(first_captured(), 1.0, 0.0));
}

TEST(Integralize, ReconstructionMatchesHandDerivation) {
  const double beta = 100.0;
  auto aug = integralize(first_captured(), beta);
  Expr u = aug.eliminate(aug.input_reconstruction);
  for (const auto& v : u.free_variables()) EXPECT_TRUE(v == "t" || v == "x1" || v == "x2" || v == "xi1") << v;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  int checked = 0;
  while (checked < 100) {
    FirstOracle o{d(rng), 2 * d(rng) - 1.0, 3 * d(rng), 0.05 * d(rng), beta};
    if (o.q() <= 1e-2) continue;
    Binding b(o.t);
    b.set("x1", o.x1).set("x2", o.x2).set("xi1", o.xi);
    EXPECT_NEAR(symbolic::eval(u, b), o.u(), 1e-9 * std::max(1.0, std::fabs(o.u())));
    ++checked;
  }
}

TEST(Integralize, ZeroOffsetGivesZeroInput) {
  auto aug = integralize(first_captured(), 100.0);
  Expr u = aug.eliminate(aug.input_reconstruction);
  Binding b(0.0);
  b.set("x1", 0.0).set("x2", -2.0).set("xi1", aug.stages.front().xi0);
  EXPECT_NEAR(symbolic::eval(u, b), 0.0, 1e-12);
}

TEST(Integralize, OutputRelativeDegreeUndefined) {
  auto aug = integralize(first_captured(), 100.0);
  auto r = system::relative_degree(aug.base, aug.base.output.front());
  EXPECT_FALSE(r.defined());
}

TEST(Sequential, EmptyListIsIdentity) {
  auto sys = fixtures::first_example();
  auto aug = sequential_capture(sys, {}, 0.01, {0.0, {0.0, -2.0}}, {100.0});
  EXPECT_EQ(aug.base.states, sys.states);
  EXPECT_EQ(aug.base.drift, sys.drift);
  EXPECT_TRUE(aug.stages.empty());
}

TEST(Sequential, SingleConstraintMatchesComposition) {
  auto a = sequential_capture(fixtures::first_example(), {fixtures::first_constraint()}, 0.01, {0.0, {0.0, -2.0}}, {100.0});
  auto b = integralize(first_captured(), 100.0);
  EXPECT_EQ(a.base.states, b.base.states);
  EXPECT_EQ(a.base.drift, b.base.drift);
  EXPECT_EQ(a.base.input_map, b.base.input_map);
  EXPECT_EQ(a.base.x0, b.base.x0);
  EXPECT_EQ(a.input_reconstruction, b.input_reconstruction);
}

TEST(Sequential, LorenzBoxConstraints) {
  auto sys = fixtures::lorenz();
  auto aug = sequential_capture(sys, fixtures::lorenz_constraints(), 0.01, {0.0, sys.x0}, {20.0});
  EXPECT_EQ(aug.base.states, (std::vector<std::string>{"x1", "x2", "x3", "z1", "xi1", "z2", "dz2", "xi2"}));
  ASSERT_EQ(aug.stages.size(), 2u);
  EXPECT_EQ(aug.stages[0].order, 1);
  EXPECT_EQ(aug.stages[1].order, 2);
  EXPECT_NEAR(aug.stages[0].xi0, 0.0143, 1e-3);
  EXPECT_NEAR(aug.stages[1].xi0, -0.0388, 1e-3);
  // Second stage differentiates through the first integral state: Omega_g = z1 s'(xi1).
  Binding b(0.0);
  b.set("x1", 0.3).set("x2", 0.2).set("x3", 4.0).set("z1", 1.7).set("xi1", 0.4);
  double expected = 1.7 * symbolic::eval(bounded_sigmoid_derivative(Expr::variable("xi1"), 20.0), b);
  EXPECT_NEAR(symbolic::eval(aug.stages[1].omega_g, b), expected, 1e-12);
  for (const auto& v : aug.stages[1].recovery_original[1].free_variables()) {
    EXPECT_TRUE(v == "t" || v == "x1" || v == "x2" || v == "x3" || v == "xi1") << v;
  }
}

TEST(Sequential, BetaListLengthChecked) {
  auto sys = fixtures::lorenz();
  EXPECT_THROW(sequential_capture(sys, fixtures::lorenz_constraints(), 0.01, {0.0, sys.x0}, {20.0, 20.0, 20.0}),
               std::invalid_argument);
}

TEST(Describe, ListsStatesAndRecovery) {
  auto aug = integralize(first_captured(), 100.0);
  std::string text = describe(aug);
  EXPECT_NE(text.find("xi1' = "), std::string::npos);
  EXPECT_NE(text.find("z1 = sqrt("), std::string::npos);
  EXPECT_EQ(text, describe(integralize(first_captured(), 100.0)));
}

}  // namespace
}  // namespace fblc::augment
