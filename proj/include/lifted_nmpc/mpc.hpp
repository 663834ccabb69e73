#ifndef LIFTED_NMPC_MPC_HPP
#define LIFTED_NMPC_MPC_HPP

#include "lifted_nmpc/cost.hpp"
#include "lifted_nmpc/lifting.hpp"
#include "lifted_nmpc/plant.hpp"
#include "lifted_nmpc/shooting.hpp"
#include "lifted_nmpc/solver.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lifted_nmpc {

using Vec = Vector<double>;
using Mat = Matrix<double>;

enum class ControllerKind { conventional, lifted };

/// Receding-horizon solver: projected L-BFGS with finite-difference or adjoint
/// gradients, or the projected Gauss-Newton method.
enum class SolveMethod { lbfgs_fd, lbfgs_adjoint, gauss_newton };

std::string to_string(ControllerKind kind);
std::string to_string(CostNormalization mode);
std::string to_string(SolveMethod method);

struct MpcConfig {
  double T = 0.05;
  int N = 5;
  int nprime = 10;  ///< FSFH subdivisions (lifted) or RK4 substeps of the discrete model (conventional)
  int M = 1;
  QuadraticWeights<double> weights;
  BoxSet<double> input_box;
  BoxSet<double> state_box;
  BoxSet<double> terminal_box;
  CostNormalization normalization = CostNormalization::integral;
  SolverOptions<double> solver;
  double state_penalty = 0.0;  ///< rho for the soft state and terminal boxes
  int fine_substeps = 100;     ///< truth simulator RK4 steps per period
  SolveMethod method = SolveMethod::lbfgs_fd;
  /// Cold-start horizon continuation: solve prefixes growing by this many blocks (0 disables).
  int horizon_continuation = 0;
  bool continuation_every_step = false;

  /// Throws ConfigError naming the offending key.
  void validate(int n, int m) const;
};

/// One receding-horizon solve.
struct StepRecord {
  int period = 0;
  double time = 0.0;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  double projected_grad_norm = 0.0;
  int evaluations = 0;
  double wall_time = 0.0;  ///< seconds
};

/// Closed-loop trajectory on the truth simulator's fine grid.
struct ScenarioResult {
  std::string plant_name;
  ControllerKind controller = ControllerKind::lifted;
  MpcConfig config;
  Vec x0;
  double duration = 0.0;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;        ///< input applied on [times[i], times[i+1])
  std::vector<int> period_index;  ///< receding-horizon step owning each fine sample
  std::vector<StepRecord> steps;
  std::map<std::string, std::string> metadata;
};

struct Metrics {
  std::optional<double> settling_time;
  double peak_input = 0.0;
  double max_state_norm = 0.0;
  double final_norm = 0.0;
  double input_violation = 0.0;
  double state_violation = 0.0;
};

/// Closed-loop run aborted at a receding-horizon step.
class MpcRunError : public std::runtime_error {
 public:
  MpcRunError(int step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}

  int step() const noexcept { return step_; }

 private:
  int step_;
};

struct TruthStep {
  Vec next;
  std::vector<Vec> trace;   ///< fine_substeps + 1 states, trace.front() == x
  std::vector<Vec> inputs;  ///< fine_substeps held inputs
};

/// Advances the plant over one period under the hold H(v) with fine_substeps RK4 steps.
TruthStep truth_step(const PlantModel<double>& plant, const Vec& x, const HoldSpec<double>& spec,
                     const Vec& v, int fine_substeps);

/// Single-shooting objective of the lifted problem from the measured state, over the
/// stacked horizon decision (N blocks of m*M). Non-finite predictions evaluate to +inf.
Objective<double> lifted_objective(const PlantModel<double>& plant, const MpcConfig& config,
                                   const Vec& x_measured);

/// Sampled-instant objective over (u_0, ..., u_{N-1}) with the discrete model
/// x_{k+1} = RK4 over T using nprime substeps.
Objective<double> conventional_objective(const PlantModel<double>& plant, const MpcConfig& config,
                                         const Vec& x_measured);

/// The same objectives in refined-grid form, with an exact adjoint gradient.
ShootingCost<double> lifted_shooting_cost(const PlantModel<double>& plant, const MpcConfig& config);
ShootingCost<double> conventional_shooting_cost(const PlantModel<double>& plant, const MpcConfig& config);

/// Discrete model used by the conventional controller.
Vec conventional_step(const PlantModel<double>& plant, const Vec& x, const Vec& u, double T, int substeps);

ScenarioResult run_conventional_mpc(const PlantModel<double>& plant, const MpcConfig& config,
                                    const Vec& x0, double duration);

ScenarioResult run_lifted_mpc(const PlantModel<double>& plant, const MpcConfig& config, const Vec& x0,
                              double duration);

ScenarioResult run_mpc(ControllerKind kind, const PlantModel<double>& plant, const MpcConfig& config,
                       const Vec& x0, double duration);

/// Settling time is the first fine-grid time after the last sample with norm >= eps.
Metrics compute_metrics(const ScenarioResult& result, double eps);

std::vector<double> state_norms(const ScenarioResult& result);

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_MPC_HPP
