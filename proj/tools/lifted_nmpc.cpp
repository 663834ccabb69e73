#include "lifted_nmpc/io.hpp"
#include "lifted_nmpc/scenario.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace lifted_nmpc;

namespace {

struct Source {
  std::vector<std::string> presets;
  std::vector<std::string> files;
  std::string controller;
  std::string out = ".";
  bool svg = false;
  int fine_substeps = 0;
  double duration = 0.0;
};

void add_common(CLI::App* cmd, Source& src, bool many) {
  auto* preset = cmd->add_option("--preset", src.presets, "Built-in scenario (vdp, cartpole-single, cartpole-multirate)");
  auto* file = cmd->add_option("--scenario", src.files, "Scenario file (key = value)");
  if (!many) {
    preset->expected(1);
    file->expected(1);
    preset->excludes(file);
  }
  cmd->add_option("--controller", src.controller, "conventional or lifted");
  cmd->add_option("--out", src.out, "Output directory");
  cmd->add_flag("--svg", src.svg, "Also write SVG plots");
  cmd->add_option("--fine-substeps", src.fine_substeps, "Truth-simulator RK4 steps per period");
  cmd->add_option("--duration", src.duration, "Override the run length [s]");
}

void apply_overrides(Scenario& s, const Source& src) {
  if (!src.controller.empty()) s.controller = parse_controller(src.controller);
  if (src.fine_substeps != 0) s.config.fine_substeps = src.fine_substeps;
  if (src.duration != 0.0) s.duration = src.duration;
  s.out_dir = src.out;
  s.svg = s.svg || src.svg;
  s.validate();
}

std::vector<Scenario> resolve(const Source& src, const std::string& fallback) {
  std::vector<Scenario> out;
  for (const auto& p : src.presets) out.push_back(preset_scenario(p));
  for (const auto& f : src.files) out.push_back(load_scenario(f));
  if (out.empty()) {
    if (fallback.empty()) throw ConfigError("one of --preset or --scenario is required");
    out.push_back(preset_scenario(fallback));
  }
  for (auto& s : out) apply_overrides(s, src);
  return out;
}

using Header = std::vector<std::pair<std::string, std::string>>;

std::string plot(std::string title, std::string y_label, std::vector<PlotSeries> series, const Header& header) {
  PlotSpec spec;
  spec.title = std::move(title);
  spec.y_label = std::move(y_label);
  spec.series = std::move(series);
  spec.header = header;
  return svg_plot(spec);
}

/// Both scenarios' resolved configuration, keys prefixed a. and b.
Header pair_header(const Scenario& a, const Scenario& b) {
  Header out;
  for (const auto& [k, v] : scenario_entries(a)) out.emplace_back("a." + k, v);
  for (const auto& [k, v] : scenario_entries(b)) out.emplace_back("b." + k, v);
  return out;
}

std::string stem(const Scenario& s) { return s.name + "-" + to_string(s.controller); }

ScenarioResult execute(const Scenario& s) {
  return run_mpc(s.controller, s.make_plant(), s.config, s.x0, s.duration);
}

std::vector<double> column(const ScenarioResult& r, int index) {
  std::vector<double> out;
  out.reserve(r.states.size());
  for (std::size_t i = 0; i < r.states.size(); ++i) {
    out.push_back(index < 0 ? r.states[i].norm() : r.inputs[i][index]);
  }
  return out;
}

void write_run(const Scenario& s, const ScenarioResult& r) {
  fs::create_directories(s.out_dir);
  const fs::path base = fs::path(s.out_dir) / stem(s);
  write_text_file(base.string() + ".csv", trajectory_csv(trajectory_table(s, r)));
  write_text_file(base.string() + ".metrics.txt", metrics_text(s, r));
  if (!s.svg) return;
  const auto& colors = plot_palette();
  const Header header = scenario_entries(s);
  std::vector<PlotSeries> states;
  for (Eigen::Index i = 0; i < r.states.front().size(); ++i) {
    std::vector<double> y;
    for (const auto& x : r.states) y.push_back(x[i]);
    states.push_back({"x" + std::to_string(i + 1), r.times, y, colors[i % colors.size()]});
  }
  const std::string title = s.name + " (" + to_string(s.controller) + ")";
  write_text_file(base.string() + ".states.svg", plot(title + " states", "x", states, header));
  write_text_file(base.string() + ".norm.svg",
                  plot(title + " state norm", "||x||", {{"||x||", r.times, column(r, -1)}}, header));
  write_text_file(base.string() + ".input.svg",
                  plot(title + " input", "u", {{"u", r.times, column(r, 0), colors[1]}}, header));
}

std::string settle_text(const std::optional<double>& t) { return t ? format_number(*t) : "none"; }

int cmd_run(const Source& src) {
  const Scenario s = resolve(src, "").front();
  const ScenarioResult r = execute(s);
  write_run(s, r);
  std::cout << "wrote " << (fs::path(s.out_dir) / stem(s)).string() << ".csv\n";
  for (const auto& [k, v] : metrics_entries(r, s.settle_eps)) std::cout << k << " = " << v << "\n";
  return 0;
}

double interpolate(const std::vector<double>& t, const std::vector<double>& y, double at) {
  if (at <= t.front()) return y.front();
  if (at >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double w = (at - t[i - 1]) / (t[i] - t[i - 1]);
  return (1.0 - w) * y[i - 1] + w * y[i];
}

int cmd_compare(const Source& src) {
  std::vector<Scenario> scenarios = resolve(src, "");
  if (scenarios.size() > 2) throw ConfigError("compare takes at most two scenarios");
  if (scenarios.size() == 1) {
    Scenario b = scenarios.front();
    scenarios.front().controller = ControllerKind::conventional;
    b.controller = ControllerKind::lifted;
    scenarios.push_back(b);
  }
  const Scenario& a = scenarios[0];
  const Scenario& b = scenarios[1];
  if (a.plant != b.plant || a.x0 != b.x0 || a.duration != b.duration) {
    throw std::invalid_argument("compared scenarios must share plant, x0 and duration");
  }
  const ScenarioResult ra = execute(a);
  const ScenarioResult rb = execute(b);
  write_run(a, ra);
  if (stem(a) != stem(b)) write_run(b, rb);

  const auto ma = metrics_entries(ra, a.settle_eps);
  const auto mb = metrics_entries(rb, b.settle_eps);
  const Metrics xa = compute_metrics(ra, a.settle_eps);
  const Metrics xb = compute_metrics(rb, b.settle_eps);
  const std::string la = stem(a);
  const std::string lb = stem(b) == la ? la + "-b" : stem(b);

  const Header header = pair_header(a, b);
  std::ostringstream report;
  report << comment_header(header);
  std::string csv = comment_header(header) + "metric,a,b,delta\n";
  report << "a = " << la << "\nb = " << lb << "\n\n";
  report << std::left;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const auto& [key, va] = ma[i];
    const std::string& vb = mb[i].second;
    std::string delta = "";
    char* ea = nullptr;
    char* eb = nullptr;
    const double da = std::strtod(va.c_str(), &ea);
    const double db = std::strtod(vb.c_str(), &eb);
    const bool numeric = *ea == '\0' && *eb == '\0' && ea != va.c_str() && eb != vb.c_str();
    if (numeric && key != "solve_time") delta = format_number(db - da);
    report << key << ": a=" << va << " b=" << vb << (delta.empty() ? "" : " delta=" + delta) << "\n";
    csv += key + "," + va + "," + vb + "," + delta + "\n";
  }
  report << "\n";
  if (xa.settling_time && xb.settling_time) {
    if (*xa.settling_time == *xb.settling_time) {
      report << "equal settling times\n";
    } else {
      report << "smaller settling time: " << (*xa.settling_time < *xb.settling_time ? la : lb) << "\n";
    }
  } else if (xa.settling_time || xb.settling_time) {
    report << "only " << (xa.settling_time ? la : lb) << " settles\n";
  } else {
    report << "neither run settles\n";
  }

  fs::create_directories(src.out);
  const fs::path dir(src.out);
  std::string norms = comment_header(header) + "t,norm_a,norm_b,delta\n";
  const auto na = column(ra, -1);
  const auto nb = column(rb, -1);
  for (std::size_t i = 0; i < ra.times.size(); ++i) {
    const double vb = interpolate(rb.times, nb, ra.times[i]);
    norms += format_number(ra.times[i]) + "," + format_number(na[i]) + "," + format_number(vb) + "," +
             format_number(vb - na[i]) + "\n";
  }
  write_text_file((dir / "compare_metrics.csv").string(), csv);
  write_text_file((dir / "compare_norms.csv").string(), norms);
  write_text_file((dir / "compare_report.txt").string(), report.str());
  if (a.svg || b.svg) {
    const auto& c = plot_palette();
    write_text_file((dir / "compare_norm.svg").string(),
                    plot("state norm", "||x||", {{la, ra.times, na, c[0], true}, {lb, rb.times, nb, c[1]}}, header));
    write_text_file((dir / "compare_input.svg").string(),
                    plot("input", "u", {{la, ra.times, column(ra, 0), c[0], true}, {lb, rb.times, column(rb, 0), c[1]}},
                         header));
  }
  std::cout << report.str();
  return 0;
}

int thread_count() {
  const char* env = std::getenv("LIFTED_NMPC_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

int cmd_sweep(const Source& src, const std::vector<double>& periods, double control_period) {
  const Scenario base = resolve(src, "cartpole-multirate").front();
  const auto plan = sweep_plan(base, periods, control_period);

  std::vector<const Scenario*> jobs;
  for (const auto& c : plan) {
    jobs.push_back(&c.conventional);
    jobs.push_back(&c.single_rate);
    jobs.push_back(&c.multi_rate);
  }
  std::vector<std::optional<ScenarioResult>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log;
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = execute(*jobs[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
      const std::lock_guard<std::mutex> lock(log);
      std::cerr << "finished " << stem(*jobs[i]) << " T=" << jobs[i]->config.T << "\n";
    }
  };
  const int threads = std::min<int>(thread_count(), static_cast<int>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  fs::create_directories(src.out);
  const fs::path dir(src.out);
  const char* labels[] = {"conventional", "lifted_single", "lifted_multirate"};
  std::ostringstream report;
  Header header = scenario_entries(base);
  std::string period_list;
  for (const double T : periods) period_list += (period_list.empty() ? "" : ", ") + format_number(T);
  header.emplace_back("periods", period_list);
  header.emplace_back("control_period", format_number(control_period));
  report << comment_header(header);
  std::string summary = comment_header(header) + "T,M,controller,settled,settling_time,final_norm,max_state_norm,peak_input,input_violation\n";
  report << "sweep of " << base.name << ", control period " << format_number(control_period) << " s, settle_eps "
         << format_number(base.settle_eps) << "\n\n";
  report << "T       M   conventional      lifted_single     lifted_multirate\n";
  int failures = 0;
  for (std::size_t c = 0; c < plan.size(); ++c) {
    const auto& pc = plan[c];
    std::ostringstream row;
    row << std::left;
    char head[32];
    std::snprintf(head, sizeof head, "%-7g %-3d ", pc.T, pc.M);
    row << head;
    std::string norms_csv = comment_header(header) + "t";
    for (const char* l : labels) norms_csv += std::string(",") + l;
    norms_csv += "\n";
    PlotSpec chart;
    chart.title = "state norm, T = " + format_number(pc.T) + " s";
    chart.y_label = "||x||";
    chart.header = header;
    std::vector<std::vector<double>> cols;
    const std::vector<double>* grid = nullptr;
    for (int k = 0; k < 3; ++k) {
      const std::size_t j = 3 * c + static_cast<std::size_t>(k);
      const Scenario& s = *jobs[j];
      char cell[32];
      if (!results[j]) {
        ++failures;
        std::snprintf(cell, sizeof cell, "%-17s ", "error");
        row << cell;
        summary += format_number(pc.T) + "," + std::to_string(s.config.M) + "," + labels[k] + ",error,,,,,\n";
        cols.emplace_back();
        continue;
      }
      const ScenarioResult& r = *results[j];
      write_text_file((dir / (stem(s) + "_T" + format_number(pc.T) + ".csv")).string(),
                      trajectory_csv(trajectory_table(s, r)));
      const Metrics m = compute_metrics(r, s.settle_eps);
      const std::string status = m.settling_time ? "settled@" + format_number(*m.settling_time) : "not settled";
      std::snprintf(cell, sizeof cell, "%-17s ", status.c_str());
      row << cell;
      summary += format_number(pc.T) + "," + std::to_string(s.config.M) + "," + labels[k] + "," +
                 (m.settling_time ? "yes" : "no") + "," + settle_text(m.settling_time) + "," +
                 format_number(m.final_norm) + "," + format_number(m.max_state_norm) + "," +
                 format_number(m.peak_input) + "," + format_number(m.input_violation) + "\n";
      cols.push_back(column(r, -1));
      if (!grid) grid = &r.times;
      chart.series.push_back({labels[k], r.times, cols.back(), plot_palette()[k], k == 0});
    }
    report << row.str() << "\n";
    if (grid) {
      for (std::size_t i = 0; i < grid->size(); ++i) {
        norms_csv += format_number((*grid)[i]);
        for (const auto& col : cols) norms_csv += "," + (i < col.size() ? format_number(col[i]) : std::string());
        norms_csv += "\n";
      }
      write_text_file((dir / ("sweep_norms_T" + format_number(pc.T) + ".csv")).string(), norms_csv);
      if (base.svg) {
        write_text_file((dir / ("sweep_norm_T" + format_number(pc.T) + ".svg")).string(), svg_plot(chart));
      }
    }
  }
  report << "\nfinal norms\n";
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    report << "  T=" << format_number(jobs[j]->config.T) << " " << labels[j % 3] << ": "
           << (results[j] ? format_number(compute_metrics(*results[j], jobs[j]->settle_eps).final_norm)
                          : "error: " + errors[j])
           << "\n";
  }
  write_text_file((dir / "sweep_summary.csv").string(), summary);
  write_text_file((dir / "sweep_report.txt").string(), report.str());
  std::cout << report.str();
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled-data NMPC with lifted intersample costs"};
  app.require_subcommand(1);

  Source run_src, cmp_src, sweep_src;
  auto* run = app.add_subcommand("run", "Run one closed-loop scenario");
  add_common(run, run_src, false);
  auto* compare = app.add_subcommand("compare", "Run two scenarios and compare their metrics");
  add_common(compare, cmp_src, true);
  auto* sweep = app.add_subcommand("sweep", "Conventional, single-rate and multi-rate runs over sampling periods");
  add_common(sweep, sweep_src, false);
  std::vector<double> periods = {0.1, 0.25, 0.5};
  double control_period = 0.05;
  sweep->add_option("--periods", periods, "Sampling periods [s]")->delimiter(',');
  sweep->add_option("--control-period", control_period, "Multi-rate control period [s]");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_src);
    if (*compare) return cmd_compare(cmp_src);
    if (*sweep) return cmd_sweep(sweep_src, periods, control_period);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const MpcRunError& e) {
    std::cerr << "run failed at " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
