#include "lifted_nmpc/mpc.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <limits>

namespace lifted_nmpc {

std::string to_string(ControllerKind kind) {
  return kind == ControllerKind::conventional ? "conventional" : "lifted";
}

std::string to_string(CostNormalization mode) {
  return mode == CostNormalization::integral ? "integral" : "per-sample";
}

std::string to_string(SolveMethod method) {
  switch (method) {
    case SolveMethod::lbfgs_fd:
      return "lbfgs-fd";
    case SolveMethod::lbfgs_adjoint:
      return "lbfgs-adjoint";
    case SolveMethod::gauss_newton:
      return "gauss-newton";
  }
  return "unknown";
}

void MpcConfig::validate(int n, int m) const {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T must be positive");
  if (N < 1) throw ConfigError("N must be >= 1");
  if (M < 1) throw ConfigError("upsampling must be >= 1");
  if (nprime < 2) throw ConfigError("nprime must be >= 2");
  if (nprime % 2 != 0) throw ConfigError("nprime must be even");
  if (nprime % M != 0) throw ConfigError("nprime must be a multiple of upsampling");
  if (fine_substeps < 1) throw ConfigError("fine_substeps must be >= 1");
  if (fine_substeps % M != 0) throw ConfigError("fine_substeps must be a multiple of upsampling");
  if (!(state_penalty >= 0.0)) throw ConfigError("rho must be nonnegative");
  if (horizon_continuation < 0) throw ConfigError("continuation must be >= 0");
  weights.validate(n, m);
  input_box.validate("u_min/u_max");
  state_box.validate("x_min/x_max");
  terminal_box.validate("xf_min/xf_max");
  if (input_box.size() != m) throw ConfigError("u_min/u_max must have m entries");
  if (state_box.size() != n) throw ConfigError("x_min/x_max must have n entries");
  if (terminal_box.size() != n) throw ConfigError("xf_min/xf_max must have n entries");
  solver.validate();
}

TruthStep truth_step(const PlantModel<double>& plant, const Vec& x, const HoldSpec<double>& spec,
                     const Vec& v, int fine_substeps) {
  if (fine_substeps < 1 || fine_substeps % spec.M != 0) {
    throw ConfigError("fine_substeps must be a positive multiple of upsampling");
  }
  if (v.size() != spec.decision_size()) throw std::invalid_argument("truth_step: decision size mismatch");
  const double h = spec.T / fine_substeps;
  const int per_segment = fine_substeps / spec.M;

  TruthStep out;
  out.trace.reserve(static_cast<std::size_t>(fine_substeps) + 1);
  out.inputs.reserve(static_cast<std::size_t>(fine_substeps));
  out.trace.push_back(x);
  Vec state = x;
  for (int r = 0; r < fine_substeps; ++r) {
    Vec u = hold_segment_value(spec, v, r / per_segment);
    state = rk4_step<double>(plant.f, state, u, h);
    out.trace.push_back(state);
    out.inputs.push_back(std::move(u));
  }
  out.next = state;
  return out;
}

Vec conventional_step(const PlantModel<double>& plant, const Vec& x, const Vec& u, double T, int substeps) {
  const double h = T / substeps;
  Vec state = x;
  for (int s = 0; s < substeps; ++s) state = rk4_step<double>(plant.f, state, u, h);
  return state;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

HoldSpec<double> hold_for(const PlantModel<double>& plant, const MpcConfig& config, ControllerKind kind) {
  HoldSpec<double> spec;
  spec.M = kind == ControllerKind::lifted ? config.M : 1;
  spec.m = plant.m;
  spec.T = config.T;
  return spec;
}

}  // namespace

Objective<double> lifted_objective(const PlantModel<double>& plant, const MpcConfig& config,
                                   const Vec& x_measured) {
  const HoldSpec<double> spec = hold_for(plant, config, ControllerKind::lifted);
  return [plant, config, spec, x_measured](const Vec& stacked) -> double {
    try {
      const auto v_seq = split_horizon(stacked, spec.decision_size());
      const auto grids = chain_lift(plant, x_measured, spec, v_seq, config.nprime);
      double total = lifted_total_cost(grids, spec, v_seq, config.weights, config.normalization);
      total += state_penalty(grids, config.state_box, config.state_penalty);
      if (!config.terminal_box.is_unbounded()) {
        total += point_penalty(grids.back().back(), config.terminal_box, config.state_penalty);
      }
      return total;
    } catch (const IntegrationError&) {
      return kInf;
    }
  };
}

Objective<double> conventional_objective(const PlantModel<double>& plant, const MpcConfig& config,
                                         const Vec& x_measured) {
  return [plant, config, x_measured](const Vec& stacked) -> double {
    try {
      const auto u_seq = split_horizon(stacked, plant.m);
      std::vector<Vec> x_seq;
      x_seq.reserve(u_seq.size() + 1);
      x_seq.push_back(x_measured);
      for (const auto& u : u_seq) {
        x_seq.push_back(conventional_step(plant, x_seq.back(), u, config.T, config.nprime));
      }
      double total = conventional_total_cost(x_seq, u_seq, config.weights);
      if (config.state_penalty > 0.0 && !config.state_box.is_unbounded()) {
        for (std::size_t k = 1; k < x_seq.size(); ++k) {
          total += point_penalty(x_seq[k], config.state_box, config.state_penalty);
        }
      }
      if (!config.terminal_box.is_unbounded()) {
        total += point_penalty(x_seq.back(), config.terminal_box, config.state_penalty);
      }
      return total;
    } catch (const IntegrationError&) {
      return kInf;
    }
  };
}

ShootingCost<double> lifted_shooting_cost(const PlantModel<double>& plant, const MpcConfig& config) {
  const HoldSpec<double> spec = hold_for(plant, config, ControllerKind::lifted);
  return {plant,
          lifted_layout(spec, config.N, config.nprime, config.normalization),
          config.weights,
          config.state_box,
          config.terminal_box,
          config.state_penalty};
}

ShootingCost<double> conventional_shooting_cost(const PlantModel<double>& plant, const MpcConfig& config) {
  return {plant,
          conventional_layout(config.T, config.N, config.nprime, plant.m),
          config.weights,
          config.state_box,
          config.terminal_box,
          config.state_penalty};
}

namespace {

SolveResult<double> solve_horizon(ControllerKind kind, const PlantModel<double>& plant, const MpcConfig& config,
                                  const Vec& x, const Vec& init) {
  const int M = kind == ControllerKind::lifted ? config.M : 1;
  const BoxSet<double> bounds = config.input_box.replicate(config.N * M);
  const auto objective = kind == ControllerKind::conventional ? conventional_objective(plant, config, x)
                                                              : lifted_objective(plant, config, x);
  if (config.method == SolveMethod::lbfgs_fd) return minimize_box(objective, Gradient<double>{}, init, bounds, config.solver);
  const ShootingCost<double> shooting = kind == ControllerKind::conventional
                                            ? conventional_shooting_cost(plant, config)
                                            : lifted_shooting_cost(plant, config);
  if (config.method == SolveMethod::gauss_newton) {
    const QuadraticModel<double> model = [&shooting, &x](const Vec& v, Vec& g, Mat& H) {
      return shooting.gauss_newton(x, v, g, H);
    };
    return minimize_box_newton(objective, model, init, bounds, config.solver);
  }
  const Gradient<double> gradient = [&shooting, &x](const Vec& v) {
    Vec g;
    shooting.value_and_gradient(x, v, g);
    return g;
  };
  return minimize_box(objective, gradient, init, bounds, config.solver);
}

// Solves the horizon prefixes of stride, 2*stride, ... blocks in turn, each seeded
// by the previous solution followed by the remaining blocks of the guess.
SolveResult<double> solve_continued(ControllerKind kind, const PlantModel<double>& plant,
                                    const MpcConfig& config, const Vec& x, const std::vector<Vec>& guess) {
  const int stride = config.horizon_continuation;
  if (stride <= 0 || stride >= config.N) return solve_horizon(kind, plant, config, x, stack_horizon(guess));
  std::vector<Vec> current = guess;
  SolveResult<double> sol;
  int evaluations = 0;
  int iterations = 0;
  for (int len = stride;; len = std::min(len + stride, config.N)) {
    MpcConfig partial = config;
    partial.N = len;
    const std::vector<Vec> prefix(current.begin(), current.begin() + len);
    sol = solve_horizon(kind, plant, partial, x, stack_horizon(prefix));
    evaluations += sol.evaluations;
    iterations += sol.iterations;
    const auto solved = split_horizon(sol.v_star, guess.front().size());
    std::copy(solved.begin(), solved.end(), current.begin());
    if (len == config.N) break;
  }
  sol.evaluations = evaluations;
  sol.iterations = iterations;
  return sol;
}

}  // namespace

ScenarioResult run_mpc(ControllerKind kind, const PlantModel<double>& plant, const MpcConfig& config,
                       const Vec& x0, double duration) {
  config.validate(plant.n, plant.m);
  if (x0.size() != plant.n) throw ConfigError("x0 must have n entries");
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");

  const HoldSpec<double> spec = hold_for(plant, config, kind);
  const int block = spec.decision_size();
  const int periods = static_cast<int>(std::floor(duration / config.T + 1e-9));
  if (periods < 1) throw ConfigError("duration must cover at least one sampling period");
  const int fine = config.fine_substeps;
  const double h = config.T / fine;

  ScenarioResult result;
  result.plant_name = plant.name;
  result.controller = kind;
  result.config = config;
  result.x0 = x0;
  result.duration = periods * config.T;
  result.metadata["discretization"] =
      kind == ControllerKind::conventional
          ? "rk4, " + std::to_string(config.nprime) + " substeps per period"
          : "fsfh rk4, " + std::to_string(config.nprime) + " subdivisions per period";
  result.metadata["cost"] = kind == ControllerKind::conventional ? "sampled" : to_string(config.normalization);

  result.metadata["solver"] = to_string(config.method);

  std::vector<Vec> guess(static_cast<std::size_t>(config.N),
                         project_box<double>(Vec::Zero(block), config.input_box.replicate(spec.M)));

  const std::size_t samples = static_cast<std::size_t>(periods) * fine + 1;
  result.times.reserve(samples);
  result.states.reserve(samples);
  result.inputs.reserve(samples);
  result.period_index.reserve(samples);

  Vec x = x0;
  for (int n = 0; n < periods; ++n) {
    try {
      const auto start = std::chrono::steady_clock::now();
      const SolveResult<double> sol = n == 0 || config.continuation_every_step
                                          ? solve_continued(kind, plant, config, x, guess)
                                          : solve_horizon(kind, plant, config, x, stack_horizon(guess));
      const auto stop = std::chrono::steady_clock::now();

      StepRecord rec;
      rec.period = n;
      rec.time = n * config.T;
      rec.cost = sol.cost;
      rec.iterations = sol.iterations;
      rec.converged = sol.converged;
      rec.projected_grad_norm = sol.projected_grad_norm;
      rec.evaluations = sol.evaluations;
      rec.wall_time = std::chrono::duration<double>(stop - start).count();
      result.steps.push_back(rec);

      const auto blocks = split_horizon(sol.v_star, block);
      const TruthStep truth = truth_step(plant, x, spec, blocks.front(), fine);
      for (int j = 0; j < fine; ++j) {
        result.times.push_back(static_cast<double>(static_cast<long long>(n) * fine + j) * h);
        result.states.push_back(truth.trace[static_cast<std::size_t>(j)]);
        result.inputs.push_back(truth.inputs[static_cast<std::size_t>(j)]);
        result.period_index.push_back(n);
      }
      x = truth.next;
      guess = warm_start_shift(blocks);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw MpcRunError(n, e.what());
    }
  }
  result.times.push_back(static_cast<double>(static_cast<long long>(periods) * fine) * h);
  result.states.push_back(x);
  result.inputs.push_back(result.inputs.back());
  result.period_index.push_back(periods - 1);
  return result;
}

ScenarioResult run_conventional_mpc(const PlantModel<double>& plant, const MpcConfig& config,
                                    const Vec& x0, double duration) {
  return run_mpc(ControllerKind::conventional, plant, config, x0, duration);
}

ScenarioResult run_lifted_mpc(const PlantModel<double>& plant, const MpcConfig& config, const Vec& x0,
                              double duration) {
  return run_mpc(ControllerKind::lifted, plant, config, x0, duration);
}

std::vector<double> state_norms(const ScenarioResult& result) {
  std::vector<double> out;
  out.reserve(result.states.size());
  for (const auto& x : result.states) out.push_back(x.norm());
  return out;
}

Metrics compute_metrics(const ScenarioResult& result, double eps) {
  Metrics m;
  if (result.states.empty()) return m;
  const auto norms = state_norms(result);

  std::optional<std::size_t> last_above;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    if (!(norms[i] < eps)) last_above = i;
    m.max_state_norm = std::max(m.max_state_norm, norms[i]);
  }
  if (!last_above) {
    m.settling_time = result.times.front();
  } else if (*last_above + 1 < norms.size()) {
    m.settling_time = result.times[*last_above + 1];
  }
  m.final_norm = norms.back();

  for (const auto& u : result.inputs) {
    if (u.size() > 0) m.peak_input = std::max(m.peak_input, u.lpNorm<Eigen::Infinity>());
  }
  if (result.config.input_box.size() > 0 && !result.inputs.empty() &&
      result.inputs.front().size() == result.config.input_box.size()) {
    m.input_violation = box_violation(result.inputs, result.config.input_box).max_violation;
  }
  if (result.config.state_box.size() > 0 && result.states.front().size() == result.config.state_box.size()) {
    m.state_violation = box_violation(result.states, result.config.state_box).max_violation;
  }
  return m;
}

}  // namespace lifted_nmpc
