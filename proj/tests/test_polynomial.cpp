#include <gtest/gtest.h>

#include <cmath>

#include "hjlayer/polynomial.hpp"
#include "hjlayer/quadrature.hpp"

using namespace hjlayer;

TEST(Polynomial, EvaluatesAscendingCoefficients) {
  const Polynomial p{1.0, -2.0, 3.0};
  EXPECT_DOUBLE_EQ(p(0.0), 1.0);
  EXPECT_DOUBLE_EQ(p(2.0), 1.0 - 4.0 + 12.0);
  EXPECT_EQ(p.degree(), 2);
}

TEST(Polynomial, TrailingZerosAreTrimmed) {
  EXPECT_EQ(Polynomial({1.0, 0.0, 0.0}).degree(), 0);
  EXPECT_TRUE(Polynomial({0.0, 0.0}).is_zero());
  EXPECT_DOUBLE_EQ(Polynomial()(3.0), 0.0);
}

TEST(Polynomial, DerivativeMatchesFiniteDifference) {
  const Polynomial p{0.3, -1.0, 0.5, 2.0, -0.25};
  const Polynomial d = p.derivative();
  for (double x : {-1.5, -0.2, 0.0, 0.7, 2.1}) {
    const double h = 1e-5;
    EXPECT_NEAR(d(x), (p(x + h) - p(x - h)) / (2 * h), 1e-6 * (1 + std::fabs(d(x))));
  }
}

TEST(Polynomial, AntiderivativeVanishesAtZeroAndDifferentiatesBack) {
  const Polynomial p{1.0, 2.0, -3.0};
  const Polynomial a = p.antiderivative();
  EXPECT_DOUBLE_EQ(a(0.0), 0.0);
  EXPECT_EQ(a.derivative(), p);
}

TEST(SignChangeRoots, FindsSimpleRoots) {
  const auto r = sign_change_roots(Polynomial{-1.0, 2.0}, 0.0, 2.0);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], 0.5, 1e-12);
  // (t - 0.5)(t - 1.5) = t^2 - 2t + 0.75
  const auto r2 = sign_change_roots(Polynomial{0.75, -2.0, 1.0}, 0.0, 2.0);
  ASSERT_EQ(r2.size(), 2u);
  EXPECT_NEAR(r2[0], 0.5, 1e-12);
  EXPECT_NEAR(r2[1], 1.5, 1e-12);
}

TEST(SignChangeRoots, IgnoresDoubleRootsAndConstants) {
  EXPECT_TRUE(sign_change_roots(Polynomial{1.0, -2.0, 1.0}, 0.0, 2.0).empty());  // (t-1)^2
  EXPECT_TRUE(sign_change_roots(Polynomial{1.0}, 0.0, 2.0).empty());
  EXPECT_TRUE(sign_change_roots(Polynomial(), 0.0, 2.0).empty());
}

TEST(SignChangeRoots, RootOnScanNode) {
  const auto r = sign_change_roots(Polynomial{-1.0, 1.0}, 0.0, 2.0);  // root t = 1 lands on a node
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0], 1.0, 1e-12);
}

TEST(Quadrature, IntegratesSmoothFunctions) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, M_PI), 2.0, 1e-9);
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::exp(x); }, -1.0, 1.0), std::exp(1.0) - std::exp(-1.0), 1e-9);
  EXPECT_EQ(adaptive_simpson([](double) { return 1.0; }, 0.3, 0.3), 0.0);
}

TEST(Quadrature, ReportsNonConvergence) {
  try {
    adaptive_simpson([](double x) { return std::sin(1.0 / (x + 1e-9)); }, 0.0, 1.0, 1e-14, 4);
    FAIL() << "expected ToleranceError";
  } catch (const ToleranceError& e) {
    EXPECT_TRUE(std::isfinite(e.estimate()));
  }
}
