#include "lifted_nmpc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lifted_nmpc {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TrajectoryTable trajectory_table(const Scenario& scenario, const ScenarioResult& result) {
  TrajectoryTable t;
  t.header = scenario_entries(scenario);
  for (const auto& [k, v] : result.metadata) t.header.emplace_back(k, v);
  t.times = result.times;
  t.states = result.states;
  t.inputs = result.inputs;
  t.period_index = result.period_index;
  const std::size_t rows = result.times.size();
  t.solve_cost.reserve(rows);
  t.solve_iters.reserve(rows);
  t.solve_converged.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const StepRecord& s = result.steps.at(static_cast<std::size_t>(result.period_index[i]));
    t.solve_cost.push_back(s.cost);
    t.solve_iters.push_back(s.iterations);
    t.solve_converged.push_back(s.converged ? 1 : 0);
  }
  return t;
}

std::string comment_header(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += "# " + k + " = " + v + "\n";
  return out;
}

std::string trajectory_csv(const TrajectoryTable& table) {
  std::string out = comment_header(table.header);
  const Eigen::Index n = table.states.empty() ? 0 : table.states.front().size();
  const Eigen::Index m = table.inputs.empty() ? 0 : table.inputs.front().size();
  out += "t";
  for (Eigen::Index i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
  for (Eigen::Index i = 1; i <= m; ++i) out += ",u" + std::to_string(i);
  out += ",period_index,solve_cost,solve_iters,solve_converged\n";
  for (std::size_t r = 0; r < table.times.size(); ++r) {
    out += csv_number(table.times[r]);
    for (Eigen::Index i = 0; i < n; ++i) out += "," + csv_number(table.states[r][i]);
    for (Eigen::Index i = 0; i < m; ++i) out += "," + csv_number(table.inputs[r][i]);
    out += "," + std::to_string(table.period_index[r]);
    out += "," + csv_number(table.solve_cost[r]);
    out += "," + std::to_string(table.solve_iters[r]);
    out += "," + std::to_string(table.solve_converged[r]);
    out += "\n";
  }
  return out;
}

TrajectoryTable parse_trajectory_csv(const std::string& text) {
  TrajectoryTable t;
  std::istringstream in(text);
  std::string line;
  int n = -1;
  int m = -1;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) t.header.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (n < 0) {
      n = static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const std::string& c) { return c[0] == 'x'; }));
      m = static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const std::string& c) { return c[0] == 'u'; }));
      if (cells.empty() || cells.front() != "t" || static_cast<int>(cells.size()) != 1 + n + m + 4) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": unexpected column header");
      }
      continue;
    }
    if (static_cast<int>(cells.size()) != 1 + n + m + 4) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " + std::to_string(1 + n + m + 4) +
                               " columns");
    }
    const auto num = [&](const std::string& c) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size()) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad number '" + c + "'");
      }
      return v;
    };
    std::size_t k = 0;
    t.times.push_back(num(cells[k++]));
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = num(cells[k++]);
    Vec u(m);
    for (int i = 0; i < m; ++i) u[i] = num(cells[k++]);
    t.states.push_back(std::move(x));
    t.inputs.push_back(std::move(u));
    t.period_index.push_back(static_cast<int>(num(cells[k++])));
    t.solve_cost.push_back(num(cells[k++]));
    t.solve_iters.push_back(static_cast<int>(num(cells[k++])));
    t.solve_converged.push_back(static_cast<int>(num(cells[k++])));
  }
  if (n < 0) throw std::runtime_error("missing column header");
  return t;
}

std::vector<std::pair<std::string, std::string>> metrics_entries(const ScenarioResult& result, double eps) {
  const Metrics m = compute_metrics(result, eps);
  double wall = 0.0;
  long iterations = 0;
  int nonconverged = 0;
  for (const auto& s : result.steps) {
    wall += s.wall_time;
    iterations += s.iterations;
    nonconverged += s.converged ? 0 : 1;
  }
  const double steps = std::max<double>(1.0, static_cast<double>(result.steps.size()));
  return {
      {"controller", to_string(result.controller)},
      {"settle_eps", format_number(eps)},
      {"settling_time", m.settling_time ? format_number(*m.settling_time) : "none"},
      {"peak_input", format_number(m.peak_input)},
      {"max_state_norm", format_number(m.max_state_norm)},
      {"final_norm", format_number(m.final_norm)},
      {"input_violation", format_number(m.input_violation)},
      {"state_violation", format_number(m.state_violation)},
      {"periods", std::to_string(result.steps.size())},
      {"mean_iterations", format_number(static_cast<double>(iterations) / steps)},
      {"nonconverged_steps", std::to_string(nonconverged)},
      {"solve_time", format_number(wall)},
  };
}

std::string metrics_text(const Scenario& scenario, const ScenarioResult& result) {
  std::string out = comment_header(scenario_entries(scenario));
  for (const auto& [k, v] : metrics_entries(result, scenario.settle_eps)) out += k + " = " + v + "\n";
  return out;
}

const std::vector<std::string>& plot_palette() {
  static const std::vector<std::string> colors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                  "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
  return colors;
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v, const char* pattern = "%.2f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  return (r < 1.5 ? 1.0 : r < 3.0 ? 2.0 : r < 7.0 ? 5.0 : 10.0) * mag;
}

}  // namespace

std::string svg_plot(const PlotSpec& spec) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : spec.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double left = 70, right = 150, top = 36, bottom = 48;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  const auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto sy = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream out;
  for (const auto& [k, v] : spec.header) {
    std::string text = k + " = " + v;
    for (auto pos = text.find("--"); pos != std::string::npos; pos = text.find("--")) text.replace(pos, 2, "- -");
    out << "<!-- " << text << " -->\n";
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape_xml(spec.title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  const double xs = nice_step(x1 - x0, 8);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
    out << "<line x1=\"" << sx(t) << "\" y1=\"" << top + ph << "\" x2=\"" << sx(t) << "\" y2=\"" << top + ph + 5
        << "\" stroke=\"black\"/>";
    out << "<text x=\"" << sx(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt(t, "%g")
        << "</text>\n";
  }
  const double ys = nice_step(y1 - y0, 6);
  for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-9 * ys; v += ys) {
    const double shown = std::abs(v) < 1e-12 * ys ? 0.0 : v;
    out << "<line x1=\"" << left << "\" y1=\"" << sy(v) << "\" x2=\"" << left + pw << "\" y2=\"" << sy(v)
        << "\" stroke=\"#e0e0e0\"/>";
    out << "<text x=\"" << left - 6 << "\" y=\"" << sy(v) + 4 << "\" text-anchor=\"end\">" << fmt(shown, "%g")
        << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << spec.height - 10 << "\" text-anchor=\"middle\">"
      << escape_xml(spec.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << escape_xml(spec.y_label) << "</text>\n";

  int legend_row = 0;
  for (const auto& s : spec.series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
    if (s.dashed) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      out << fmt(sx(s.x[i])) << "," << fmt(sy(s.y[i])) << " ";
    }
    out << "\"/>\n";
    const double ly = top + 12 + 18 * legend_row++;
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 34 << "\" y2=\"" << ly
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "")
        << "/>";
    out << "<text x=\"" << left + pw + 40 << "\" y=\"" << ly + 4 << "\">" << escape_xml(s.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace lifted_nmpc
