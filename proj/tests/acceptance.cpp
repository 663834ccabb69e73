// Acceptance report: one PASS/FAIL line per criterion. Always exits 0 once the
// report is complete; the verdicts are the output.
#include "lifted_nmpc/io.hpp"
#include "lifted_nmpc/scenario.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

using namespace lifted_nmpc;

namespace {

constexpr double kRk4BandLow = 13.0;
constexpr double kRk4BandHigh = 19.0;
constexpr double kSimpsonTol = 1e-12;
constexpr double kLiftTol = 1e-6;
constexpr double kLiftImprovement = 13.0;
constexpr double kKktTol = 1e-6;
constexpr double kVdpEps = 0.05;
constexpr double kVdpMargin = 0.25;
constexpr double kCartEps = 0.2;
constexpr double kMultiRateEps = 0.5;
constexpr double kMultiRateBy = 15.0;
constexpr double kGradTol = 1e-4;
constexpr double kRichardsonStep = 1e-3;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::map<int, Verdict> verdicts;
std::vector<std::pair<std::string, ScenarioResult>> closed_loops;

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string settle_text(const std::optional<double>& t) { return t ? format_number(*t) + " s" : "none"; }

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ScenarioResult run(const Scenario& s, const std::string& label) {
  const auto start = std::chrono::steady_clock::now();
  auto r = run_mpc(s.controller, s.make_plant(), s.config, s.x0, s.duration);
  std::printf("  ran %s in %.1f s\n", label.c_str(), elapsed(start));
  std::fflush(stdout);
  closed_loops.emplace_back(label, r);
  return r;
}

Scenario with_controller(Scenario s, ControllerKind kind) {
  s.controller = kind;
  return s;
}

void rk4_order() {
  const auto p = make_vdp_plant<double>(1.0);
  const InputSignal<double> u = [](double) { return Vec::Zero(1); };
  const auto end = [&](int steps) { return integrate_grid<double>(p.f, vec({2, 0}), u, {0.0, 1.0}, steps).back(); };
  const int coarse = 50;
  const Vec ref = end(coarse * 2 * 16);
  const double ratio = (end(coarse) - ref).norm() / (end(coarse * 2) - ref).norm();
  verdicts[1] = {ratio >= kRk4BandLow && ratio <= kRk4BandHigh,
                 "error ratio " + fmt("%.3f", ratio) + " at h=0.02 -> 0.01 (band [13, 19])"};
}

void simpson_exact() {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> d(-2, 2);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int degree = trial % 4;
    double c[4] = {0, 0, 0, 0};
    for (int k = 0; k <= degree; ++k) c[k] = d(rng);
    const double a = d(rng), b = a + 0.5 + std::abs(d(rng));
    auto poly = [&](double t) { return c[0] + t * (c[1] + t * (c[2] + t * c[3])); };
    auto anti = [&](double t) { return t * (c[0] + t * (c[1] / 2 + t * (c[2] / 3 + t * c[3] / 4))); };
    const double exact = anti(b) - anti(a);
    for (int points : {3, 5, 11}) {
      std::vector<double> s;
      for (int i = 0; i < points; ++i) s.push_back(poly(a + (b - a) * i / (points - 1)));
      const double got = simpson_integrate(s, (b - a) / (points - 1));
      worst = std::max(worst, std::abs(got - exact) / std::max(std::abs(exact), 1e-300));
    }
  }
  verdicts[2] = {worst <= kSimpsonTol, "worst relative error " + fmt("%.2e", worst) + " (tol 1e-12)"};
}

void linear_lift() {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  Mat A(3, 3), B(3, 1);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) A(i, j) = d(rng);
    B(i, 0) = d(rng);
  }
  A -= (A.eigenvalues().real().maxCoeff() + 0.5) * Mat::Identity(3, 3);
  const LinearPlant<double> lin{A, B, Mat::Identity(3, 3)};
  const auto plant = make_linear_plant(lin);
  const Vec x = vec({d(rng), d(rng), d(rng)});
  const Vec v = vec({d(rng)});
  const double T = 0.2;
  const auto ref = linear_lift_reference(lin, x, v, T, 10);
  auto error = [&](int substeps) {
    const auto g = fsfh_lift(plant, x, HoldSpec<double>{1, 1, T}, v, 10, substeps);
    double e = 0;
    for (int j = 0; j <= 10; ++j) e = std::max(e, (g.states[j] - ref[j].state).norm() / ref[j].state.norm());
    return e;
  };
  const double e1 = error(1), e2 = error(2);
  verdicts[3] = {e1 <= kLiftTol && e1 / e2 >= kLiftImprovement,
                 "max relative error " + fmt("%.2e", e1) + ", improvement x" + fmt("%.2f", e1 / e2) +
                     " with doubled substeps"};
}

void kkt_oracle() {
  std::mt19937 rng(4);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto qp = oracles::random_box_qp(rng, 1 + trial % 4);
    const Objective<double> f = [&](const Vec& x) { return qp.value(x); };
    SolverOptions<double> opts;
    opts.grad_tolerance = 1e-10;
    const auto r = minimize_box(f, Vec(Vec::Zero(qp.g.size())), BoxSet<double>{qp.lower, qp.upper}, opts);
    worst = std::max(worst, (r.v_star - oracles::enumerate_box_qp(qp)).lpNorm<Eigen::Infinity>());
  }
  verdicts[4] = {worst <= kKktTol, "worst argument error " + fmt("%.2e", worst) + " over 50 problems"};
}

void vdp_steering(ScenarioResult& lifted_out) {
  const Scenario s = preset_scenario("vdp");
  const auto conv = run(with_controller(s, ControllerKind::conventional), "vdp conventional");
  lifted_out = run(with_controller(s, ControllerKind::lifted), "vdp lifted");
  const auto mc = compute_metrics(conv, kVdpEps), ml = compute_metrics(lifted_out, kVdpEps);
  const bool pass = mc.settling_time && ml.settling_time && *ml.settling_time <= *mc.settling_time + kVdpMargin;
  verdicts[6] = {pass, "settling (eps 0.05) conventional " + settle_text(mc.settling_time) + ", lifted " +
                           settle_text(ml.settling_time) + "; final norms " + fmt("%.4g", mc.final_norm) + " / " +
                           fmt("%.4g", ml.final_norm)};
}

void cartpole_single(ScenarioResult& lifted_out) {
  const Scenario s = preset_scenario("cartpole-single");
  const auto conv = run(with_controller(s, ControllerKind::conventional), "cartpole-single conventional");
  lifted_out = run(with_controller(s, ControllerKind::lifted), "cartpole-single lifted");
  const auto mc = compute_metrics(conv, kCartEps), ml = compute_metrics(lifted_out, kCartEps);
  const bool pass =
      mc.settling_time && ml.settling_time && *ml.settling_time <= *mc.settling_time + s.config.T + 1e-12;
  verdicts[7] = {pass, "settling (eps 0.2) conventional " + settle_text(mc.settling_time) + ", lifted " +
                           settle_text(ml.settling_time) + "; final norms " + fmt("%.4g", mc.final_norm) + " / " +
                           fmt("%.4g", ml.final_norm)};
}

void multirate(ScenarioResult& lifted_out) {
  const Scenario base = preset_scenario("cartpole-multirate");
  const auto plan = sweep_plan(base, {0.5}, 0.05);
  const auto conv = run(plan[0].conventional, "T=0.5 conventional");
  const auto single = run(plan[0].single_rate, "T=0.5 single-rate lifted");
  lifted_out = run(base, "T=0.5 multi-rate lifted (M=10)");
  const auto norms = state_norms(lifted_out);
  double worst_late = 0;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (lifted_out.times[i] >= kMultiRateBy) worst_late = std::max(worst_late, norms[i]);
  }
  const auto mm = compute_metrics(lifted_out, base.settle_eps);
  verdicts[8] = {worst_late < kMultiRateEps,
                 "multi-rate max norm on [15, 20] s " + fmt("%.3g", worst_late) + " (settled eps 0.1 at " +
                     settle_text(mm.settling_time) + "); recorded final norms conventional " +
                     fmt("%.4g", state_norms(conv).back()) + ", single-rate " + fmt("%.4g", state_norms(single).back())};
}

void constraints() {
  bool pass = true;
  std::string detail;
  for (const auto& [label, r] : closed_loops) {
    const auto m = compute_metrics(r, 0.1);
    const bool vdp_box = r.plant_name == "vdp" && r.config.input_box.lower[0] == -0.75 && r.config.input_box.upper[0] == 1.0;
    const bool cart_box =
        r.plant_name == "cartpole" && r.config.input_box.lower[0] == -15.0 && r.config.input_box.upper[0] == 15.0;
    pass = pass && m.input_violation == 0.0 && (vdp_box || cart_box);
  }
  detail = std::to_string(closed_loops.size()) + " closed loops, every fine-grid input inside its box";
  if (!pass) detail = "violation or unexpected box in " + std::to_string(closed_loops.size()) + " closed loops";
  verdicts[5] = {pass, detail};
}

void determinism(const std::map<std::string, ScenarioResult>& first) {
  bool pass = true;
  std::string detail;
  for (const auto& [name, r] : first) {
    const Scenario s = preset_scenario(name);
    const auto again = run(s, name + " repeat");
    const bool same = trajectory_csv(trajectory_table(s, r)) == trajectory_csv(trajectory_table(s, again));
    pass = pass && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " differs");
  }
  verdicts[9] = {pass, detail};
}

void gradient_sanity() {
  const Scenario s = preset_scenario("cartpole-single");
  const auto plant = s.make_plant();
  const auto objective = lifted_objective(plant, s.config, s.x0);
  std::mt19937 rng(10);
  std::uniform_real_distribution<double> d(-15, 15);
  double worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Vec v(s.config.N * s.config.M);
    for (auto& e : v) e = d(rng);
    const Vec g = fd_gradient(objective, v, s.config.solver.fd_step);
    Vec ref(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      ref[i] = oracles::richardson_partial(objective, v, static_cast<int>(i), kRichardsonStep);
    }
    worst = std::max(worst, (g - ref).norm() / ref.norm());
  }
  verdicts[10] = {worst <= kGradTol, "worst relative error " + fmt("%.2e", worst) + " over 10 vectors (tol 1e-4)"};
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  rk4_order();
  simpson_exact();
  linear_lift();
  kkt_oracle();
  gradient_sanity();

  std::map<std::string, ScenarioResult> preset_runs;
  vdp_steering(preset_runs["vdp"]);
  cartpole_single(preset_runs["cartpole-single"]);
  multirate(preset_runs["cartpole-multirate"]);
  determinism(preset_runs);
  constraints();

  const char* names[] = {"",
                         "integrator order",
                         "simpson exactness",
                         "linear lifting oracle",
                         "solver KKT correctness",
                         "constraint satisfaction",
                         "van der pol steering",
                         "cart-pole single-rate swing-up",
                         "multi-rate sweep at T=0.5",
                         "determinism",
                         "gradient sanity"};
  int passed = 0;
  for (int c = 1; c <= 10; ++c) {
    const auto& v = verdicts.at(c);
    passed += v.pass;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", c, names[c], v.detail.c_str());
  }
  std::printf("%d/10 criteria pass (%.0f s)\n", passed, elapsed(start));
  return 0;
}
