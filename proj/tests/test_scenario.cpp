#include "lifted_nmpc/io.hpp"
#include "lifted_nmpc/scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace lifted_nmpc;

namespace {

Mat diag(std::initializer_list<double> d) {
  Vec v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v[i++] = x;
  return v.asDiagonal();
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST(Presets, VanDerPol) {
  const Scenario s = preset_scenario("vdp");
  EXPECT_EQ(s.plant, "vdp");
  EXPECT_EQ(s.config.T, 0.05);
  EXPECT_EQ(s.config.N, 5);
  EXPECT_EQ(s.config.nprime, 10);
  EXPECT_EQ(s.config.weights.Q, diag({4, 1}));
  EXPECT_EQ(s.config.weights.R, Mat::Identity(1, 1));
  EXPECT_EQ(s.config.weights.Qf, diag({8, 2}));
  EXPECT_EQ(s.config.input_box.lower[0], -0.75);
  EXPECT_EQ(s.config.input_box.upper[0], 1.0);
  EXPECT_EQ(s.duration, 10.0);
  EXPECT_EQ(s.settle_eps, 0.05);
  EXPECT_NO_THROW(s.validate());
}

TEST(Presets, CartPole) {
  const Scenario s = preset_scenario("cartpole-single");
  EXPECT_EQ(s.plant, "cartpole");
  EXPECT_EQ(s.config.T, 0.02);
  EXPECT_EQ(s.config.N, 20);
  EXPECT_EQ(s.config.weights.Q, diag({2.5, 10, 0.01, 0.01}));
  EXPECT_EQ(s.config.weights.R(0, 0), 0.1);
  EXPECT_EQ(s.config.weights.Qf, diag({3, 10, 0.02, 0.02}));
  EXPECT_EQ(s.config.input_box.lower[0], -15.0);
  EXPECT_EQ(s.config.input_box.upper[0], 15.0);
  EXPECT_EQ(s.x0[1], M_PI);
  EXPECT_EQ(s.settle_eps, 0.1);

  const Scenario mr = preset_scenario("cartpole-multirate");
  EXPECT_EQ(mr.config.T, 0.5);
  EXPECT_EQ(mr.config.M, 10);
  EXPECT_EQ(mr.duration, 20.0);
  EXPECT_NO_THROW(mr.validate());
}

TEST(Presets, UnknownNameListsAvailable) {
  try {
    preset_scenario("pendulum");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("vdp, cartpole-single, cartpole-multirate"), std::string::npos);
  }
}

TEST(Parse, OverridesPresetInAnyOrder) {
  const Scenario s = parse_scenario("[mpc]\nN = 7  # horizon\npreset = vdp\n[run]\ncontroller = conventional\n");
  EXPECT_EQ(s.config.N, 7);
  EXPECT_EQ(s.config.T, 0.05);
  EXPECT_EQ(s.controller, ControllerKind::conventional);
}

TEST(Parse, DiagonalAndFullMatrices) {
  const Scenario a = parse_scenario("preset = vdp\nQ = 1, 2\n");
  EXPECT_EQ(a.config.weights.Q, diag({1, 2}));
  const Scenario b = parse_scenario("preset = vdp\nQ = 2, 1, 1, 3\n");
  Mat full(2, 2);
  full << 2, 1, 1, 3;
  EXPECT_EQ(b.config.weights.Q, full);
}

TEST(Parse, RejectsIndivisibleUpsampling) {
  try {
    parse_scenario("preset = vdp\nM = 3\nnprime = 10\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("nprime must be a multiple of upsampling"), std::string::npos);
  }
}

TEST(Parse, ReportsLineOfUnknownAndDuplicateKeys) {
  try {
    parse_scenario("preset = vdp\n\nhorizon = 3\n", "demo.ini");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_TRUE(starts_with(e.what(), "demo.ini:3:"));
  }
  try {
    parse_scenario("N = 3\nN = 4\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(parse_scenario("N = three\n"), ParseError);
  EXPECT_THROW(parse_scenario("just text\n"), ParseError);
}

TEST(Parse, ResolvedTextRoundTrips) {
  Scenario s = preset_scenario("cartpole-multirate");
  s.config.weights.Q(0, 1) = s.config.weights.Q(1, 0) = 0.1;
  s.config.solver.fd_step = 1.0 / 3.0;
  const Scenario back = parse_scenario(scenario_to_text(s));
  EXPECT_EQ(scenario_entries(back), scenario_entries(s));
  EXPECT_EQ(back.config.solver.fd_step, 1.0 / 3.0);
  EXPECT_EQ(back.config.weights.Q, s.config.weights.Q);
}

TEST(Parse, EveryModelKeyIsEchoed) {
  auto entries = scenario_entries(preset_scenario("vdp"));
  const auto cart = scenario_entries(preset_scenario("cartpole-single"));
  entries.insert(entries.end(), cart.begin(), cart.end());
  for (const auto& key : scenario_keys()) {
    if (key == "preset" || key == "out_dir" || key == "svg") continue;
    const bool found = std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == key; });
    EXPECT_TRUE(found) << key;
  }
}

TEST(Sweep, DerivesUpsamplingRates) {
  Scenario base = preset_scenario("cartpole-multirate");
  const auto plan = sweep_plan(base, {0.1, 0.25, 0.5}, 0.05);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].M, 2);
  EXPECT_EQ(plan[1].M, 5);
  EXPECT_EQ(plan[2].M, 10);
  for (const auto& c : plan) {
    EXPECT_EQ(c.conventional.controller, ControllerKind::conventional);
    EXPECT_EQ(c.single_rate.config.M, 1);
    EXPECT_EQ(c.multi_rate.config.M, c.M);
    EXPECT_EQ(c.multi_rate.config.nprime % c.M, 0);
    EXPECT_EQ(c.multi_rate.config.nprime % 2, 0);
    EXPECT_EQ(c.multi_rate.config.T, c.T);
  }
}

TEST(Sweep, RejectsIndivisiblePeriod) {
  EXPECT_THROW(sweep_plan(preset_scenario("cartpole-multirate"), {0.07}, 0.05), ConfigError);
}

TEST(Csv, RoundTripIsBitExact) {
  Scenario s = preset_scenario("vdp");
  s.duration = 0.25;
  const auto result = run_mpc(s.controller, s.make_plant(), s.config, s.x0, s.duration);
  const auto table = trajectory_table(s, result);
  const std::string text = trajectory_csv(table);
  const auto back = parse_trajectory_csv(text);
  EXPECT_EQ(back.times, table.times);
  EXPECT_EQ(back.states, table.states);
  EXPECT_EQ(back.inputs, table.inputs);
  EXPECT_EQ(back.period_index, table.period_index);
  EXPECT_EQ(back.solve_cost, table.solve_cost);
  EXPECT_EQ(back.solve_iters, table.solve_iters);
  EXPECT_EQ(back.solve_converged, table.solve_converged);
  EXPECT_EQ(back.header, table.header);
  EXPECT_EQ(trajectory_csv(back), text);
}

TEST(Csv, HeaderEchoesConfigurationBeforeColumns) {
  Scenario s = preset_scenario("vdp");
  s.duration = 0.1;
  const auto result = run_mpc(s.controller, s.make_plant(), s.config, s.x0, s.duration);
  const std::string csv = trajectory_csv(trajectory_table(s, result));
  EXPECT_TRUE(starts_with(csv, "# name = vdp\n"));
  EXPECT_NE(csv.find("\nt,x1,x2,u1,period_index,solve_cost,solve_iters,solve_converged\n"), std::string::npos);
  EXPECT_NE(csv.find("# T = 0.05\n"), std::string::npos);

  const std::string metrics = metrics_text(s, result);
  EXPECT_TRUE(starts_with(metrics, "# name = vdp\n"));
  EXPECT_NE(metrics.find("input_violation = 0\n"), std::string::npos);
}

TEST(Svg, CarriesHeaderAndSeries) {
  PlotSpec spec;
  spec.title = "demo";
  spec.y_label = "y";
  spec.series.push_back({"a--b", {0, 1, 2}, {0, 1, 4}});
  spec.header = {{"name", "x--y"}};
  const std::string svg = svg_plot(spec);
  EXPECT_TRUE(starts_with(svg, "<?xml") || starts_with(svg, "<!--") || starts_with(svg, "<svg"));
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  const auto open = svg.find("<!--");
  ASSERT_NE(open, std::string::npos);
  const std::string comment = svg.substr(open + 4, svg.find("-->", open) - open - 4);
  EXPECT_EQ(comment.find("--"), std::string::npos);
}

TEST(Numbers, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.05), "0.05");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333333333");
  EXPECT_EQ(std::stod(format_number(M_PI)), M_PI);
}
