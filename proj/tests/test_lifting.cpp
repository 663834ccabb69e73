#include "lifted_nmpc/lifting.hpp"
#include "lifted_nmpc/plant.hpp"

#include <gtest/gtest.h>

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

LinearPlant<double> stable_plant(std::mt19937& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Md A(3, 3), B(3, 1);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) A(i, j) = d(rng);
    B(i, 0) = d(rng);
  }
  A -= (A.eigenvalues().real().maxCoeff() + 0.5) * Md::Identity(3, 3);
  return {A, B, Md::Identity(3, 3)};
}

}  // namespace

TEST(Hold, SegmentsAndBoundaries) {
  const HoldSpec<double> spec{4, 1, 1.0};
  const Vd v = vec({1, 2, 3, 4});
  EXPECT_EQ(hold_eval(spec, v, 0.0)[0], 1.0);
  EXPECT_EQ(hold_eval(spec, v, 0.24)[0], 1.0);
  EXPECT_EQ(hold_eval(spec, v, 0.25)[0], 2.0);
  EXPECT_EQ(hold_eval(spec, v, 0.99)[0], 4.0);
  EXPECT_THROW(hold_eval(spec, v, 1.0), std::invalid_argument);
  EXPECT_THROW(hold_eval(spec, v, -0.1), std::invalid_argument);
}

TEST(Hold, MultiInputBlocks) {
  const HoldSpec<double> spec{2, 2, 0.5};
  const Vd v = vec({1, 2, 3, 4});
  EXPECT_EQ(hold_eval(spec, v, 0.1), vec({1, 2}));
  EXPECT_EQ(hold_eval(spec, v, 0.3), vec({3, 4}));
  EXPECT_THROW(hold_eval(spec, vec({1, 2, 3}), 0.1), std::invalid_argument);
}

TEST(Hold, SingleRateIsConstant) {
  const HoldSpec<double> spec{1, 1, 0.2};
  for (double t : {0.0, 0.05, 0.1999}) EXPECT_EQ(hold_eval(spec, vec({-3}), t)[0], -3.0);
}

TEST(Hold, RejectsBadSpec) {
  EXPECT_THROW((HoldSpec<double>{0, 1, 1.0}.validate()), ConfigError);
  EXPECT_THROW((HoldSpec<double>{1, 0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((HoldSpec<double>{1, 1, 0.0}.validate()), ConfigError);
}

TEST(LiftSignal, BlocksAndFlatten) {
  const std::vector<int> s{1, 2, 3, 4, 5, 6};
  const auto l = lift_signal(s, 0.3, 3);
  ASSERT_EQ(l.blocks.size(), 2u);
  EXPECT_EQ(l.blocks[0], (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(l.blocks[1], (std::vector<int>{4, 5, 6}));
  EXPECT_EQ(l.flatten(), s);
  EXPECT_DOUBLE_EQ(l.period, 0.3);
  EXPECT_THROW(lift_signal(s, 0.3, 4), std::invalid_argument);
  EXPECT_THROW(lift_signal(s, 0.3, 0), std::invalid_argument);
}

TEST(FsfhLift, ZeroPlantIsConstant) {
  const auto p = make_zero_plant<double>(2, 1);
  const auto g = fsfh_lift(p, vec({1, -1}), HoldSpec<double>{1, 1, 1.0}, vec({5}), 10);
  ASSERT_EQ(g.states.size(), 11u);
  for (const auto& x : g.states) EXPECT_EQ(x, vec({1, -1}));
  EXPECT_DOUBLE_EQ(g.spacing(), 0.1);
}

TEST(FsfhLift, IntegratorFollowsHold) {
  const LinearPlant<double> lin{Md::Zero(1, 1), Md::Identity(1, 1), Md::Identity(1, 1)};
  const auto p = make_linear_plant(lin);
  const auto g = fsfh_lift(p, vec({0}), HoldSpec<double>{2, 1, 1.0}, vec({1, -1}), 4);
  const double want[] = {0, 0.25, 0.5, 0.25, 0};
  for (int j = 0; j <= 4; ++j) EXPECT_NEAR(g.states[j][0], want[j], 1e-15);
}

TEST(FsfhLift, RejectsIncompatibleSubdivision) {
  const auto p = make_zero_plant<double>(1, 1);
  EXPECT_THROW(fsfh_lift(p, vec({0}), HoldSpec<double>{3, 1, 1.0}, vec({0, 0, 0}), 10), ConfigError);
  EXPECT_THROW(fsfh_lift(p, vec({0}), HoldSpec<double>{1, 1, 1.0}, vec({0}), 0), ConfigError);
  EXPECT_THROW(fsfh_lift(p, vec({0}), HoldSpec<double>{1, 1, 1.0}, vec({0}), 2, 0), ConfigError);
  EXPECT_THROW(fsfh_lift(p, vec({0}), HoldSpec<double>{2, 1, 1.0}, vec({0}), 2), std::invalid_argument);
}

TEST(FsfhLift, MatchesLinearReferenceAndConvergesAtFourthOrder) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const auto lin = stable_plant(rng);
    const auto p = make_linear_plant(lin);
    const Vd x = vec({1.0, -0.5, 0.25});
    const Vd u = vec({0.8});
    const auto ref = linear_lift_reference(lin, x, u, 0.2, 10);
    auto err = [&](int substeps) {
      const auto g = fsfh_lift(p, x, HoldSpec<double>{1, 1, 0.2}, u, 10, substeps);
      double e = 0;
      for (int j = 0; j <= 10; ++j) e = std::max(e, (g.states[j] - ref[j].state).norm() / ref[j].state.norm());
      return e;
    };
    const double e1 = err(1);
    EXPECT_LT(e1, 1e-6) << "trial " << trial;
    EXPECT_GE(e1 / err(2), 13.0) << "trial " << trial;
  }
}

TEST(FsfhLift, SplittingPeriodsIsBitExact) {
  const auto p = make_vdp_plant<double>();
  const Vd x = vec({2, 0});
  const auto whole = fsfh_lift(p, x, HoldSpec<double>{1, 1, 0.2}, vec({0.3}), 4);
  const auto first = fsfh_lift(p, x, HoldSpec<double>{1, 1, 0.1}, vec({0.3}), 2);
  const auto second = fsfh_lift(p, first.back(), HoldSpec<double>{1, 1, 0.1}, vec({0.3}), 2);
  EXPECT_EQ(whole.states[2], first.back());
  EXPECT_EQ(whole.back(), second.back());
}

TEST(ChainLift, ContinuousAcrossPeriods) {
  const auto p = make_vdp_plant<double>();
  const HoldSpec<double> spec{2, 1, 0.1};
  const std::vector<Vd> vs{vec({0.1, -0.2}), vec({0.5, 0.0}), vec({-0.7, 1.0})};
  const auto grids = chain_lift(p, vec({2, 0}), spec, vs, 4);
  ASSERT_EQ(grids.size(), 3u);
  EXPECT_EQ(grids[0].front(), vec({2, 0}));
  for (std::size_t k = 1; k < grids.size(); ++k) EXPECT_EQ(grids[k].front(), grids[k - 1].back());
  EXPECT_THROW(chain_lift(p, vec({2, 0}), spec, {}, 4), std::invalid_argument);
}

TEST(ChainLift, LinearEndpointsMatchDiscretization) {
  std::mt19937 rng(9);
  const auto lin = stable_plant(rng);
  const auto p = make_linear_plant(lin);
  const auto d = discretize_linear(lin, 0.25);
  const std::vector<Vd> vs{vec({1}), vec({-1}), vec({0.5})};
  const auto grids = chain_lift(p, vec({0.5, 0.5, 0.5}), HoldSpec<double>{1, 1, 0.25}, vs, 10, 4);
  Vd x = vec({0.5, 0.5, 0.5});
  for (std::size_t k = 0; k < vs.size(); ++k) {
    x = d.Ad * x + d.Bd * vs[k];
    EXPECT_LT((grids[k].back() - x).norm(), 1e-9);
  }
}

TEST(Horizon, SplitAndStackRoundTrip) {
  const Vd v = vec({1, 2, 3, 4, 5, 6});
  const auto blocks = split_horizon(v, 2);
  ASSERT_EQ(blocks.size(), 3u);
  EXPECT_EQ(blocks[1], vec({3, 4}));
  EXPECT_EQ(stack_horizon(blocks), v);
  EXPECT_THROW(split_horizon(v, 4), std::invalid_argument);
}
