#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "hjlayer/solver.hpp"

using namespace hjlayer;

namespace {

HamiltonianPtr example_hamiltonian() {
  const SeparableTerm term{Polynomial{-1.0, 2.0}, Profile(Polynomial{0.0, 0.0, 1.0})};
  return std::make_shared<const LayeredHamiltonian>(LayeredHamiltonian::split_separable(1, 2.0, term));
}

HamiltonianPtr single_layer(LayerKind kind, Polynomial h, double T = 1.0, std::size_t dim = 1) {
  return std::make_shared<const LayeredHamiltonian>(
      dim, std::vector<double>{0.0, T},
      std::vector<LayerForm>{LayerForm{kind, PolynomialForm{{SeparableTerm{Polynomial{1.0}, Profile(std::move(h))}}, {}}}});
}

HamiltonianPtr zero_hamiltonian(double T = 1.0) {
  return std::make_shared<const LayeredHamiltonian>(1, std::vector<double>{0.0, T},
                                                    std::vector<LayerForm>{LayerForm{LayerKind::Separable, PolynomialForm{}}});
}

InitialData abs_sigma() { return InitialData(1, PiecewiseLinear{{0.0}, {-1.0, 1.0}, 0.0}); }

double closed_form(double t, double x) {
  if (t <= 0.5) return std::fabs(x) + t - t * t;
  const double s = (t - 0.5) * (t - 0.5);
  return std::fabs(x) <= 2.0 * s ? x * x / (4.0 * s) + 0.25 : std::fabs(x) - s + 0.25;
}

const Grid kX = Grid::line(-3.0, 3.0, 601);
const Grid kDual = Grid::line(-1.0, 1.0, 2001);

class Golden : public ::testing::Test {
protected:
  static void SetUpTestSuite() { sol_ = new LayeredSolution(build_layered_solution(abs_sigma(), example_hamiltonian(), kDual, kX)); }
  static void TearDownTestSuite() { delete sol_; }
  static LayeredSolution* sol_;
};
LayeredSolution* Golden::sol_ = nullptr;

}  // namespace

TEST_F(Golden, KernelsMatchHandBiconjugation) {
  ASSERT_EQ(sol_->kernels().size(), 2u);
  for (double v : sol_->kernels()[0].values()) EXPECT_NEAR(v, 0.0, 1e-12);
  for (double v : sol_->kernels()[1].values()) EXPECT_NEAR(v, -0.25, 1e-12);
  for (const auto& k : sol_->kernels()) EXPECT_TRUE(is_discretely_convex(k, 1e-12));
}

TEST_F(Golden, PointValues) {
  const auto a = sol_->eval(0.5, Point{0.0});
  EXPECT_NEAR(a.value, 0.25, 1e-12);
  ASSERT_EQ(a.argmax.maximizers.size(), 2u);
  EXPECT_EQ(a.argmax.maximizers[0][0], -1.0);
  EXPECT_EQ(a.argmax.maximizers[1][0], 1.0);
  EXPECT_NEAR(sol_->eval(2.0, Point{0.0}).value, 0.25, 1e-12);
  EXPECT_THROW(sol_->eval(2.01, Point{0.0}), DomainError);
}

TEST_F(Golden, InitialCondition) {
  for (std::size_t i = 0; i < kX.size(); ++i) {
    const double x = kX.node(0, i);
    EXPECT_NEAR(sol_->eval(0.0, Point{x}).value, std::fabs(x), 1e-12);
  }
}

TEST_F(Golden, ClosedFormOnCoarseGrid) {
  for (int i = 0; i <= 40; ++i) {
    const double t = i * 0.05;
    const SliceEvaluator u(*sol_, t);
    for (int j = 0; j <= 60; ++j) {
      const double x = -3.0 + j * 0.1;
      EXPECT_NEAR(u.value(Point{x}), closed_form(t, x), 1e-3) << t << " " << x;
    }
  }
}

TEST_F(Golden, SliceEvaluatorAgreesWithEval) {
  for (double t : {0.0, 0.3, 0.5, 1.2, 2.0}) {
    const SliceEvaluator u(*sol_, t);
    for (double x : {-2.2, -0.01, 0.0, 0.7}) {
      const auto a = sol_->eval(t, Point{x});
      EXPECT_EQ(u.value(Point{x}), a.value);
      EXPECT_EQ(u(Point{x}).argmax.indices, a.argmax.indices);
    }
  }
}

TEST_F(Golden, HopfGlobalComparison) {
  EXPECT_NEAR(sol_->eval_hopf_global(2.0, Point{0.0}).value, 0.0, 1e-12);
  for (int i = 0; i <= 40; ++i) {
    const double t = i * 0.05;
    const SliceEvaluator u(*sol_, t), uh(*sol_, t, true);
    for (int j = 0; j <= 60; ++j) {
      const Point x{-3.0 + j * 0.1};
      EXPECT_LE(uh.value(x), u.value(x) + 1e-9);
      if (t <= 0.5) {
        EXPECT_EQ(uh.value(x), u.value(x));  // first layer shares the kernel
      }
    }
  }
}

TEST_F(Golden, GluingContinuity) { EXPECT_LE(gluing_error(*sol_, kX), 1e-8); }

TEST_F(Golden, SemiconvexityAtFourM) {
  SemiconvexityOptions opt;
  opt.samples = 20000;
  opt.C = 4.0 * sol_->hamiltonian().sup_abs_Ht({{-1.0, 1.0}}).value;
  opt.seed = 99;
  opt.time = {0.0, 2.0};
  opt.space = {{-3.0, 3.0}};
  const auto rep = check_semiconvexity(*sol_, opt);
  EXPECT_EQ(rep.C, 8.0);
  EXPECT_EQ(rep.samples_tested, 20000u);
  EXPECT_TRUE(rep.violations.empty());
}

TEST_F(Golden, ResidualSmoothRegion) {
  std::vector<double> times;
  for (int i = 61; i < 200; ++i) times.push_back(i * 0.01);
  const auto rep = check_pde_residual(*sol_, times, Grid::line(-2.0, 2.0, 401), 1e-3, 0.0);
  EXPECT_EQ(rep.included, times.size() * 401);
  EXPECT_LE(rep.max_residual, 1e-2);
}

TEST_F(Golden, ResidualLargeAtKinkWithoutExclusion) {
  const std::vector<double> times{0.1, 0.2, 0.3};
  const auto rep = check_pde_residual(*sol_, times, Grid::line(-0.5, 0.5, 101), 1e-3, 0.0);
  EXPECT_GT(rep.max_residual, 0.1);
  EXPECT_EQ(rep.argmax.x[0], 0.0);
  // Excluding the kink line restores a small residual.
  std::vector<SpaceTimePoint> kinks;
  for (double t : times) kinks.push_back({t, Point{0.0}});
  EXPECT_LE(check_pde_residual(*sol_, times, Grid::line(-0.5, 0.5, 101), 1e-3, 0.03, kinks).max_residual, 1e-2);
}

TEST(Semiconvexity, AffineFunctionHasNoViolations) {
  SemiconvexityOptions opt;
  opt.samples = 5000;
  opt.C = 0.0;
  opt.space = {{-3.0, 3.0}};
  const auto rep = check_semiconvexity([](double t, const Point& x) { return 2.0 * t - 0.5 * x[0] + 1.0; }, opt);
  EXPECT_TRUE(rep.violations.empty());
}

TEST(Semiconvexity, ConcaveKinkIsReported) {
  SemiconvexityOptions opt;
  opt.samples = 0;
  opt.C = 8.0;
  opt.space = {{-3.0, 3.0}};
  opt.extra.push_back({{0.5, Point{-0.01}}, {0.5, Point{0.01}}, 0.5});
  const auto rep = check_semiconvexity([](double, const Point& x) { return -std::fabs(x[0]); }, opt);
  ASSERT_EQ(rep.violations.size(), 1u);
  // defect 0.01, allowed 0.25 * 4 * 0.02^2 = 0.0004
  EXPECT_NEAR(rep.violations[0].excess, 0.0096, 1e-15);
}

TEST(Solver, ZeroHamiltonianKeepsInitialData) {
  const InitialData sigma(1, PiecewiseLinear{{-1.0, 0.5}, {-1.0, 0.25, 1.0}, 0.0});
  const auto sol = build_layered_solution(sigma, zero_hamiltonian(), Grid::line(-1.0, 1.0, 161), kX);
  for (double t : {0.0, 0.4, 1.0})
    for (std::size_t i = 0; i < kX.size(); i += 7) {
      const Point x{kX.node(0, i)};
      EXPECT_NEAR(sol.eval(t, x).value, sigma.value(x), 1e-12);
    }
  const auto rep = check_pde_residual(sol, std::vector<double>{0.2, 0.7}, Grid::line(-0.9, 0.9, 19), 1e-3, 0.0);
  EXPECT_LE(rep.max_residual, 1e-12);
}

TEST(Solver, SingleConvexLayerIsBruteForceHopf) {
  const InitialData sigma(1, PiecewiseLinear{{-0.5, 0.5}, {-1.0, 0.0, 1.0}, 0.0});
  const auto ham = single_layer(LayerKind::ConvexInP, Polynomial{0.0, 0.0, 0.5});
  const Grid dual = Grid::line(-1.0, 1.0, 401);
  const auto sol = build_layered_solution(sigma, ham, dual, kX);
  // Oracle: sigma^* by direct scan of sampled sigma, then a direct scan of the Hopf maximum.
  std::vector<double> sstar(dual.size(), -kPlusInfinity);
  for (std::size_t j = 0; j < dual.size(); ++j)
    for (std::size_t i = 0; i < kX.size(); ++i)
      sstar[j] = std::max(sstar[j], kX.node(0, i) * dual.node(0, j) - sigma.value(Point{kX.node(0, i)}));
  for (double t : {0.25, 1.0})
    for (double x : {-2.0, -0.3, 0.0, 0.45, 1.7}) {
      double best = -kPlusInfinity;
      for (std::size_t j = 0; j < dual.size(); ++j) {
        const double q = dual.node(0, j);
        best = std::max(best, x * q - (sstar[j] + ham->integral_H(0.0, t, Point{q})));
      }
      EXPECT_EQ(sol.eval(t, Point{x}).value, best);
      EXPECT_EQ(sol.eval_hopf_global(t, Point{x}).value, best);
    }
}

TEST(Solver, RejectsNonConvexSigma) {
  const Grid g = Grid::line(-1.0, 1.0, 21);
  std::vector<double> v(21);
  for (std::size_t i = 0; i < 21; ++i) v[i] = std::fabs(g.node(0, i));
  v[5] += 0.3;
  EXPECT_THROW(build_layered_solution(InitialData(1, SampledFunction(g, v)), zero_hamiltonian(), kDual, g), InputError);
}

TEST(Solver, RejectsMistaggedLayer) {
  const auto ham = single_layer(LayerKind::ConvexInP, Polynomial{0.0, 0.0, -1.0});
  try {
    build_layered_solution(abs_sigma(), ham, kDual, kX);
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& e) {
    EXPECT_EQ(e.layer(), 0u);
  }
}

TEST(Solver, TwoDimensionalSeparableProblemSplitsByAxis) {
  // sigma = |x1| + |x2| and H = (2t - 1)(p1^2 + p2^2): u is the sum of two 1D solutions.
  const SeparableTerm term{Polynomial{-1.0, 2.0}, Profile(Polynomial{0.0, 0.0, 1.0})};
  const auto ham2 = std::make_shared<const LayeredHamiltonian>(LayeredHamiltonian::split_separable(2, 2.0, term));
  const InitialData sigma2(2, PiecewiseLinear{{0.0}, {-1.0, 1.0}, 0.0});
  const Grid dual2({{-1.0, 1.0}, {-1.0, 1.0}}, {41, 41});
  const Grid x2({{-2.0, 2.0}, {-2.0, 2.0}}, {41, 41});
  const auto sol2 = build_layered_solution(sigma2, ham2, dual2, x2);
  const auto sol1 = build_layered_solution(abs_sigma(), example_hamiltonian(), Grid::line(-1.0, 1.0, 41), Grid::line(-2.0, 2.0, 41));
  for (double t : {0.0, 0.3, 0.5, 0.9, 2.0})
    for (double a : {-1.3, 0.0, 0.4})
      for (double b : {-0.2, 0.6, 1.9}) {
        const double want = sol1.eval(t, Point{a}).value + sol1.eval(t, Point{b}).value;
        EXPECT_NEAR(sol2.eval(t, Point{a, b}).value, want, 1e-9) << t << " " << a << " " << b;
      }
}

TEST(Solver, TwoDimensionalConvexLayerAgainstClosedForm) {
  // H = |p|^2 / 2, sigma = |x1| + |x2|: u = sum of per-axis Huber profiles.
  const auto ham = single_layer(LayerKind::ConvexInP, Polynomial{0.0, 0.0, 0.5}, 1.0, 2);
  const InitialData sigma(2, PiecewiseLinear{{0.0}, {-1.0, 1.0}, 0.0});
  const auto sol = build_layered_solution(sigma, ham, Grid({{-1.0, 1.0}, {-1.0, 1.0}}, {201, 201}),
                                          Grid({{-2.0, 2.0}, {-2.0, 2.0}}, {201, 201}));
  const auto huber = [](double t, double x) {
    return std::fabs(x) <= t ? x * x / (2 * t) : std::fabs(x) - t / 2;
  };
  for (double t : {0.2, 1.0})
    for (double a : {-1.5, 0.05, 0.3})
      for (double b : {-0.1, 0.8})
        EXPECT_NEAR(sol.eval(t, Point{a, b}).value, huber(t, a) + huber(t, b), 1e-4);
}
