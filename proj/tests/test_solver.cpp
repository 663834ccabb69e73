#include "lifted_nmpc/solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lifted_nmpc;
using Vd = Vector<double>;
using Md = Matrix<double>;

namespace {

Vd vec(std::initializer_list<double> v) {
  Vd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(FdGradient, Examples) {
  const Objective<double> sq = [](const Vd& x) { return x.dot(x); };
  EXPECT_LT((fd_gradient(sq, vec({1, 2}), 1e-6) - vec({2, 4})).norm(), 1e-8);
  const Objective<double> constant = [](const Vd&) { return 3.0; };
  EXPECT_EQ(fd_gradient(constant, vec({1, 2, 3}), 1e-6), Vd::Zero(3));
  const Objective<double> s = [](const Vd& x) { return std::sin(x[0]); };
  EXPECT_NEAR(fd_gradient(s, vec({0.3}), 1e-4)[0], std::cos(0.3), 1e-8 / 6 + 1e-11);
}

TEST(FdGradient, NonFiniteProbeCarriesCoordinate) {
  const Objective<double> f = [](const Vd& x) { return x[1] > 1.0 ? std::nan("") : x.sum(); };
  try {
    fd_gradient(f, vec({0, 1}), 1e-3);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_EQ(e.coordinate(), 1);
  }
}

TEST(ProjectBox, Examples) {
  const auto box = BoxSet<double>::uniform(3, -1, 1);
  EXPECT_EQ(project_box(vec({0.1, -0.2, 0.3}), box), vec({0.1, -0.2, 0.3}));
  EXPECT_EQ(project_box(vec({2}), BoxSet<double>::uniform(1, -1, 1)), vec({1}));
  EXPECT_EQ(project_box(vec({-3, 0.5, 9}), box), vec({-1, 0.5, 1}));
}

TEST(MinimizeBox, InteriorMinimum) {
  const Objective<double> f = [](const Vd& x) { return (x[0] - 0.3) * (x[0] - 0.3); };
  const auto r = minimize_box(f, vec({0}), BoxSet<double>::uniform(1, -1, 1));
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.v_star[0], 0.3, 1e-10);
  EXPECT_NEAR(r.cost, 0.0, 1e-10);
}

TEST(MinimizeBox, ActiveBound) {
  const Objective<double> f = [](const Vd& x) { return (x[0] - 2) * (x[0] - 2); };
  const auto r = minimize_box(f, vec({0}), BoxSet<double>::uniform(1, -1, 1));
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.v_star[0], 1.0);
  EXPECT_EQ(r.projected_grad_norm, 0.0);
}

TEST(MinimizeBox, Rosenbrock) {
  const Objective<double> f = [](const Vd& x) {
    return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
  };
  SolverOptions<double> opts;
  opts.max_iterations = 1000;
  opts.grad_tolerance = 1e-9;
  const auto r = minimize_box(f, vec({-1.2, 1}), BoxSet<double>::uniform(2, -2, 2), opts);
  EXPECT_LT((r.v_star - vec({1, 1})).norm(), 1e-5);
}

TEST(MinimizeBox, InfeasibleStartIsProjected) {
  const Objective<double> f = [](const Vd& x) { return x.squaredNorm(); };
  const auto r = minimize_box(f, vec({5, -5}), BoxSet<double>::uniform(2, 1, 2));
  EXPECT_LT((r.v_star - vec({1, 1})).norm(), 1e-12);
}

TEST(MinimizeBox, NonFiniteInitialPoint) {
  const Objective<double> f = [](const Vd&) { return std::numeric_limits<double>::infinity(); };
  EXPECT_THROW(minimize_box(f, vec({0}), BoxSet<double>::uniform(1, -1, 1)), EvaluationError);
}

TEST(MinimizeBox, MatchesActiveSetEnumeration) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 4;
    const auto qp = oracles::random_box_qp(rng, dim);
    const Objective<double> f = [&](const Vd& x) { return qp.value(x); };
    const Gradient<double> g = [&](const Vd& x) { return Vd(qp.H * x + qp.g); };
    SolverOptions<double> opts;
    opts.grad_tolerance = 1e-10;
    const BoxSet<double> box{qp.lower, qp.upper};
    const Vd want = oracles::enumerate_box_qp(qp);
    const auto fd = minimize_box(f, Vd(Vd::Zero(dim)), box, opts);
    const auto exact = minimize_box(f, g, Vd(Vd::Zero(dim)), box, opts);
    EXPECT_LT((fd.v_star - want).norm(), 1e-6) << "trial " << trial;
    EXPECT_LT((exact.v_star - want).norm(), 1e-6) << "trial " << trial;
    EXPECT_TRUE((exact.v_star.array() >= qp.lower.array()).all() && (exact.v_star.array() <= qp.upper.array()).all());
  }
}

TEST(MinimizeBoxNewton, MatchesActiveSetEnumeration) {
  std::mt19937 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 4;
    const auto qp = oracles::random_box_qp(rng, dim);
    const Objective<double> f = [&](const Vd& x) { return qp.value(x); };
    const QuadraticModel<double> model = [&](const Vd& x, Vd& g, Md& h) {
      g = qp.H * x + qp.g;
      h = qp.H;
      return qp.value(x);
    };
    SolverOptions<double> opts;
    opts.grad_tolerance = 1e-10;
    const auto r = minimize_box_newton(f, model, Vd(Vd::Zero(dim)), BoxSet<double>{qp.lower, qp.upper}, opts);
    EXPECT_LT((r.v_star - oracles::enumerate_box_qp(qp)).norm(), 1e-6) << "trial " << trial;
  }
}

TEST(MinimizeBox, Deterministic) {
  const Objective<double> f = [](const Vd& x) {
    return std::pow(x[0] - 0.5, 4) + std::cosh(x[1]) + x[0] * x[1];
  };
  const auto a = minimize_box(f, vec({0.9, -0.9}), BoxSet<double>::uniform(2, -1, 1));
  const auto b = minimize_box(f, vec({0.9, -0.9}), BoxSet<double>::uniform(2, -1, 1));
  EXPECT_EQ(a.v_star, b.v_star);
  EXPECT_EQ(a.cost, b.cost);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(MinimizeBox, RejectsBadOptions) {
  const Objective<double> f = [](const Vd& x) { return x.squaredNorm(); };
  SolverOptions<double> opts;
  opts.armijo_c = 1.5;
  EXPECT_THROW(minimize_box(f, vec({0}), BoxSet<double>::uniform(1, -1, 1), opts), ConfigError);
}

TEST(WarmStartShift, Examples) {
  const std::vector<Vd> abc{vec({1}), vec({2}), vec({3})};
  EXPECT_EQ(warm_start_shift(abc), (std::vector<Vd>{vec({2}), vec({3}), vec({3})}));
  EXPECT_EQ(warm_start_shift(std::vector<Vd>{vec({7})}), (std::vector<Vd>{vec({7})}));
  EXPECT_EQ(warm_start_shift(warm_start_shift(abc)), (std::vector<Vd>{vec({3}), vec({3}), vec({3})}));
  EXPECT_THROW(warm_start_shift(std::vector<Vd>{}), std::invalid_argument);
}
