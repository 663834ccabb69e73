#ifndef LIFTED_NMPC_SCENARIO_HPP
#define LIFTED_NMPC_SCENARIO_HPP

#include "lifted_nmpc/mpc.hpp"

#include <string>
#include <vector>

namespace lifted_nmpc {

/// Configuration file or command-line parse failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, int line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A fully resolved closed-loop experiment.
struct Scenario {
  std::string name = "scenario";
  std::string preset;
  std::string plant = "vdp";  ///< vdp | cartpole
  double mu = 1.0;
  CartPoleParams cartpole;
  ControllerKind controller = ControllerKind::lifted;
  MpcConfig config;
  Vec x0;
  double duration = 10.0;
  double settle_eps = 0.05;
  std::string out_dir = ".";
  bool svg = false;

  int states() const;
  int inputs() const;
  PlantModel<double> make_plant() const;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

std::vector<std::string> available_presets();

/// Throws ConfigError listing the available presets for an unknown name.
Scenario preset_scenario(const std::string& name);

/// Parses the key = value scenario format. `[section]` lines group keys for readability
/// and do not affect lookup; `#` starts a comment. A `preset` key is applied first,
/// then every other key overrides it regardless of order.
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");

Scenario load_scenario(const std::string& path);

/// Every key with its resolved value, in a form parse_scenario accepts.
std::vector<std::pair<std::string, std::string>> scenario_entries(const Scenario& s);
std::string scenario_to_text(const Scenario& s);

/// Keys recognised by parse_scenario.
std::vector<std::string> scenario_keys();

ControllerKind parse_controller(const std::string& text);
CostNormalization parse_normalization(const std::string& text);
SolveMethod parse_method(const std::string& text);

/// One sampling period of a multi-rate sweep and its three controllers.
struct SweepCase {
  double T = 0.0;
  int M = 1;
  Scenario conventional;
  Scenario single_rate;
  Scenario multi_rate;
};

/// Derives per-period scenarios from `base`. Each period must be an integer multiple of
/// `control_period`; nprime and fine_substeps are raised to the next valid multiple.
std::vector<SweepCase> sweep_plan(const Scenario& base, const std::vector<double>& periods,
                                  double control_period);

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_SCENARIO_HPP
