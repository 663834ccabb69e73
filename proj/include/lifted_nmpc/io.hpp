#ifndef LIFTED_NMPC_IO_HPP
#define LIFTED_NMPC_IO_HPP

#include "lifted_nmpc/scenario.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lifted_nmpc {

/// Trajectory CSV contents: one row per fine-grid sample.
struct TrajectoryTable {
  std::vector<std::pair<std::string, std::string>> header;  ///< echoed configuration
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  std::vector<int> period_index;
  std::vector<double> solve_cost;
  std::vector<int> solve_iters;
  std::vector<int> solve_converged;
};

/// Per-row view of a closed-loop result, with the owning solve's statistics.
TrajectoryTable trajectory_table(const Scenario& scenario, const ScenarioResult& result);

/// 17-significant-digit columns t, x1..xn, u1..um, period_index, solve_cost, solve_iters, solve_converged.
/// Comment lines `# key = value` precede the column header.
std::string trajectory_csv(const TrajectoryTable& table);
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);
TrajectoryTable parse_trajectory_csv(const std::string& text);

/// key = value metrics summary.
std::vector<std::pair<std::string, std::string>> metrics_entries(const ScenarioResult& result, double eps);
std::string metrics_text(const Scenario& scenario, const ScenarioResult& result);

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label = "t [s]";
  std::string y_label;
  std::vector<PlotSeries> series;
  int width = 720;
  int height = 360;
  std::vector<std::pair<std::string, std::string>> header;  ///< emitted as leading XML comments
};

/// Minimal line plot: axes, ticks, polylines and a legend.
std::string svg_plot(const PlotSpec& spec);

/// `# key = value` lines for a file header.
std::string comment_header(const std::vector<std::pair<std::string, std::string>>& entries);

/// Default colors for overlaid series.
const std::vector<std::string>& plot_palette();

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_IO_HPP
