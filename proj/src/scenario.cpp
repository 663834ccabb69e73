#include "lifted_nmpc/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace lifted_nmpc {

namespace {

const std::vector<std::string> kPresets = {"vdp", "cartpole-single", "cartpole-multirate"};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_list(const Vec& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

std::string format_matrix(const Mat& a) {
  if (a.size() == 0) return "";
  const Mat off = a - Mat(a.diagonal().asDiagonal());
  if (a.rows() == a.cols() && off.cwiseAbs().maxCoeff() == 0.0) return format_list(a.diagonal());
  Vec flat(a.size());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) flat[r * a.cols() + c] = a(r, c);
  }
  return format_list(flat);
}

struct Entry {
  std::string value;
  int line = 0;
};

class Reader {
 public:
  Reader(std::string source, std::map<std::string, Entry> entries)
      : source_(std::move(source)), entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  const Entry& at(const std::string& key) const { return entries_.at(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ParseError(source_, entries_.at(key).line, key + ": " + what);
  }

  double real(const std::string& key) const {
    const std::string& text = at(key).value;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || std::isnan(v)) fail(key, "expected a number, got '" + text + "'");
    return v;
  }

  int integer(const std::string& key) const {
    const std::string& text = at(key).value;
    int v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail(key, "expected an integer, got '" + text + "'");
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string& text = at(key).value;
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    fail(key, "expected true or false, got '" + text + "'");
  }

  Vec list(const std::string& key) const {
    std::string text = at(key).value;
    std::replace(text.begin(), text.end(), ',', ' ');
    std::istringstream in(text);
    std::vector<double> values;
    std::string token;
    while (in >> token) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size() || std::isnan(v)) fail(key, "bad list entry '" + token + "'");
      values.push_back(v);
    }
    if (values.empty()) fail(key, "empty list");
    return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
  }

  template <typename Fn>
  auto word(const std::string& key, Fn parse) const {
    try {
      return parse(at(key).value);
    } catch (const ConfigError& e) {
      fail(key, e.what());
    }
  }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
};

Mat matrix_from(const Vec& values, int dim, const std::string& key) {
  if (values.size() == dim) return values.asDiagonal();
  if (values.size() == static_cast<Eigen::Index>(dim) * dim) {
    Mat out(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) out(r, c) = values[r * dim + c];
    }
    return out;
  }
  throw ConfigError(key + " needs " + std::to_string(dim) + " diagonal or " + std::to_string(dim * dim) +
                    " row-major entries");
}

Scenario vdp_preset() {
  Scenario s;
  s.name = "vdp";
  s.preset = "vdp";
  s.plant = "vdp";
  s.mu = 1.0;
  MpcConfig& c = s.config;
  c.T = 0.05;
  c.N = 5;
  c.nprime = 10;
  c.M = 1;
  c.weights.Q = Vec::Map(std::vector<double>{4.0, 1.0}.data(), 2).asDiagonal();
  c.weights.R = Mat::Identity(1, 1);
  c.weights.Qf = 2.0 * c.weights.Q;
  c.input_box = BoxSet<double>::uniform(1, -0.75, 1.0);
  c.state_box = BoxSet<double>::unbounded(2);
  c.terminal_box = BoxSet<double>::unbounded(2);
  s.x0 = Vec(2);
  s.x0 << 2.0, 0.0;
  s.duration = 10.0;
  s.settle_eps = 0.05;
  return s;
}

Scenario cartpole_single_preset() {
  Scenario s;
  s.name = "cartpole-single";
  s.preset = "cartpole-single";
  s.plant = "cartpole";
  MpcConfig& c = s.config;
  c.T = 0.02;
  c.N = 20;
  c.nprime = 10;
  c.M = 1;
  Vec q(4), qf(4);
  q << 2.5, 10.0, 0.01, 0.01;
  qf << 3.0, 10.0, 0.02, 0.02;
  c.weights.Q = q.asDiagonal();
  c.weights.R = 0.1 * Mat::Identity(1, 1);
  c.weights.Qf = qf.asDiagonal();
  c.input_box = BoxSet<double>::uniform(1, -15.0, 15.0);
  c.state_box = BoxSet<double>::unbounded(4);
  c.terminal_box = BoxSet<double>::unbounded(4);
  s.x0 = Vec(4);
  s.x0 << 0.0, M_PI, 0.0, 0.0;
  s.duration = 10.0;
  s.settle_eps = 0.1;
  c.method = SolveMethod::gauss_newton;
  c.solver.max_iterations = 100;
  return s;
}

Scenario cartpole_multirate_preset() {
  Scenario s = cartpole_single_preset();
  s.name = "cartpole-multirate";
  s.preset = "cartpole-multirate";
  s.config.T = 0.5;
  s.config.M = 10;
  s.config.horizon_continuation = 2;
  s.config.continuation_every_step = true;
  s.duration = 20.0;
  return s;
}

}  // namespace

int Scenario::states() const {
  if (plant == "vdp") return 2;
  if (plant == "cartpole") return 4;
  throw ConfigError("plant must be vdp or cartpole");
}

int Scenario::inputs() const {
  states();
  return 1;
}

PlantModel<double> Scenario::make_plant() const {
  if (plant == "vdp") return make_vdp_plant<double>(mu);
  if (plant == "cartpole") return make_cartpole_plant<double>(cartpole);
  throw ConfigError("plant must be vdp or cartpole");
}

void Scenario::validate() const {
  const int n = states();
  const int m = inputs();
  if (plant == "cartpole") {
    if (!(cartpole.l > 0.0)) throw ConfigError("l must be positive");
    if (!(cartpole.m_c > 0.0)) throw ConfigError("m_c must be positive");
    if (!(cartpole.m_p >= 0.0)) throw ConfigError("m_p must be nonnegative");
  }
  if (!std::isfinite(mu)) throw ConfigError("mu must be finite");
  if (x0.size() != n) throw ConfigError("x0 must have " + std::to_string(n) + " entries");
  if (!x0.allFinite()) throw ConfigError("x0 must be finite");
  if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("duration must be positive");
  if (!(duration >= config.T * (1.0 - 1e-9))) throw ConfigError("duration must cover at least one period T");
  if (!(settle_eps > 0.0)) throw ConfigError("settle_eps must be positive");
  config.validate(n, m);
}

std::vector<std::string> available_presets() { return kPresets; }

Scenario preset_scenario(const std::string& name) {
  if (name == "vdp") return vdp_preset();
  if (name == "cartpole-single") return cartpole_single_preset();
  if (name == "cartpole-multirate") return cartpole_multirate_preset();
  std::string list;
  for (const auto& p : kPresets) list += (list.empty() ? "" : ", ") + p;
  throw ConfigError("unknown preset '" + name + "' (available: " + list + ")");
}

ControllerKind parse_controller(const std::string& text) {
  if (text == "conventional") return ControllerKind::conventional;
  if (text == "lifted") return ControllerKind::lifted;
  throw ConfigError("controller must be conventional or lifted");
}

CostNormalization parse_normalization(const std::string& text) {
  if (text == "integral") return CostNormalization::integral;
  if (text == "per-sample") return CostNormalization::per_sample;
  throw ConfigError("normalization must be integral or per-sample");
}

SolveMethod parse_method(const std::string& text) {
  if (text == "lbfgs-fd") return SolveMethod::lbfgs_fd;
  if (text == "lbfgs-adjoint") return SolveMethod::lbfgs_adjoint;
  if (text == "gauss-newton") return SolveMethod::gauss_newton;
  throw ConfigError("method must be lbfgs-fd, lbfgs-adjoint or gauss-newton");
}

std::vector<std::string> scenario_keys() {
  return {"name",          "preset",         "plant",         "mu",
          "g",             "l",              "m_c",           "m_p",
          "controller",    "x0",             "duration",      "settle_eps",
          "T",             "N",              "nprime",        "M",
          "Q",             "R",              "Qf",            "u_min",
          "u_max",         "x_min",          "x_max",         "xf_min",
          "xf_max",        "rho",            "normalization", "fine_substeps",
          "method",        "continuation",   "continuation_every_step",
          "max_iterations", "grad_tolerance", "fd_step",       "lbfgs_memory",
          "armijo_c",      "backtrack_factor", "max_backtracks", "out_dir",
          "svg"};
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  const auto keys = scenario_keys();
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ParseError(source, line_no, "unknown key '" + key + "'");
    }
    if (entries.count(key)) throw ParseError(source, line_no, "duplicate key '" + key + "'");
    entries[key] = {value, line_no};
  }
  const Reader r(source, entries);

  Scenario s;
  s.x0 = Vec();
  if (r.has("preset")) {
    try {
      s = preset_scenario(r.at("preset").value);
    } catch (const ConfigError& e) {
      r.fail("preset", e.what());
    }
  } else {
    s.config.weights = {};
    s.config.input_box = {};
    s.config.state_box = {};
    s.config.terminal_box = {};
  }
  if (r.has("name")) s.name = r.at("name").value;
  if (r.has("plant")) {
    const std::string p = r.at("plant").value;
    if (p != "vdp" && p != "cartpole") r.fail("plant", "must be vdp or cartpole");
    if (p != s.plant) {
      s.config.state_box = {};
      s.config.terminal_box = {};
    }
    s.plant = p;
  }
  if (r.has("mu")) s.mu = r.real("mu");
  if (r.has("g")) s.cartpole.g = r.real("g");
  if (r.has("l")) s.cartpole.l = r.real("l");
  if (r.has("m_c")) s.cartpole.m_c = r.real("m_c");
  if (r.has("m_p")) s.cartpole.m_p = r.real("m_p");
  if (r.has("controller")) s.controller = r.word("controller", parse_controller);
  if (r.has("x0")) s.x0 = r.list("x0");
  if (r.has("duration")) s.duration = r.real("duration");
  if (r.has("settle_eps")) s.settle_eps = r.real("settle_eps");

  MpcConfig& c = s.config;
  if (r.has("T")) c.T = r.real("T");
  if (r.has("N")) c.N = r.integer("N");
  if (r.has("nprime")) c.nprime = r.integer("nprime");
  if (r.has("M")) c.M = r.integer("M");
  if (r.has("rho")) c.state_penalty = r.real("rho");
  if (r.has("normalization")) c.normalization = r.word("normalization", parse_normalization);
  if (r.has("fine_substeps")) c.fine_substeps = r.integer("fine_substeps");
  if (r.has("method")) c.method = r.word("method", parse_method);
  if (r.has("continuation")) c.horizon_continuation = r.integer("continuation");
  if (r.has("continuation_every_step")) c.continuation_every_step = r.boolean("continuation_every_step");
  if (r.has("max_iterations")) c.solver.max_iterations = r.integer("max_iterations");
  if (r.has("grad_tolerance")) c.solver.grad_tolerance = r.real("grad_tolerance");
  if (r.has("fd_step")) c.solver.fd_step = r.real("fd_step");
  if (r.has("lbfgs_memory")) c.solver.lbfgs_memory = r.integer("lbfgs_memory");
  if (r.has("armijo_c")) c.solver.armijo_c = r.real("armijo_c");
  if (r.has("backtrack_factor")) c.solver.backtrack_factor = r.real("backtrack_factor");
  if (r.has("max_backtracks")) c.solver.max_backtracks = r.integer("max_backtracks");
  if (r.has("out_dir")) s.out_dir = r.at("out_dir").value;
  if (r.has("svg")) s.svg = r.boolean("svg");

  const int n = s.states();
  const int m = s.inputs();
  const auto weight = [&](const char* key, Mat& target, int dim) {
    if (r.has(key)) {
      try {
        target = matrix_from(r.list(key), dim, key);
      } catch (const ConfigError& e) {
        r.fail(key, e.what());
      }
    }
    if (target.size() == 0) throw ParseError(source, 0, std::string(key) + " is required");
  };
  weight("Q", c.weights.Q, n);
  weight("R", c.weights.R, m);
  weight("Qf", c.weights.Qf, n);

  const auto bounds = [&](const char* lo_key, const char* hi_key, BoxSet<double>& box, int dim, bool required) {
    if (box.size() != dim) box = BoxSet<double>::unbounded(dim);
    const auto assign = [&](const char* key, Vec& side) {
      if (!r.has(key)) return;
      Vec v = r.list(key);
      if (v.size() == 1 && dim > 1) v = Vec::Constant(dim, v[0]);
      if (v.size() != dim) r.fail(key, "needs " + std::to_string(dim) + " entries");
      side = v;
    };
    assign(lo_key, box.lower);
    assign(hi_key, box.upper);
    if (required && !r.has(lo_key) && !r.has(hi_key) && s.preset.empty()) {
      throw ParseError(source, 0, std::string(lo_key) + "/" + hi_key + " are required");
    }
  };
  bounds("u_min", "u_max", c.input_box, m, true);
  bounds("x_min", "x_max", c.state_box, n, false);
  bounds("xf_min", "xf_max", c.terminal_box, n, false);

  if (s.x0.size() == 0) throw ParseError(source, 0, "x0 is required");
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

std::vector<std::pair<std::string, std::string>> scenario_entries(const Scenario& s) {
  const MpcConfig& c = s.config;
  std::vector<std::pair<std::string, std::string>> out = {
      {"name", s.name},
      {"plant", s.plant},
  };
  if (s.plant == "vdp") {
    out.emplace_back("mu", format_double(s.mu));
  } else {
    out.emplace_back("g", format_double(s.cartpole.g));
    out.emplace_back("l", format_double(s.cartpole.l));
    out.emplace_back("m_c", format_double(s.cartpole.m_c));
    out.emplace_back("m_p", format_double(s.cartpole.m_p));
  }
  out.insert(out.end(), {
      {"controller", to_string(s.controller)},
      {"x0", format_list(s.x0)},
      {"duration", format_double(s.duration)},
      {"settle_eps", format_double(s.settle_eps)},
      {"T", format_double(c.T)},
      {"N", std::to_string(c.N)},
      {"nprime", std::to_string(c.nprime)},
      {"M", std::to_string(c.M)},
      {"Q", format_matrix(c.weights.Q)},
      {"R", format_matrix(c.weights.R)},
      {"Qf", format_matrix(c.weights.Qf)},
      {"u_min", format_list(c.input_box.lower)},
      {"u_max", format_list(c.input_box.upper)},
      {"x_min", format_list(c.state_box.lower)},
      {"x_max", format_list(c.state_box.upper)},
      {"xf_min", format_list(c.terminal_box.lower)},
      {"xf_max", format_list(c.terminal_box.upper)},
      {"rho", format_double(c.state_penalty)},
      {"normalization", to_string(c.normalization)},
      {"fine_substeps", std::to_string(c.fine_substeps)},
      {"method", to_string(c.method)},
      {"continuation", std::to_string(c.horizon_continuation)},
      {"continuation_every_step", c.continuation_every_step ? "true" : "false"},
      {"max_iterations", std::to_string(c.solver.max_iterations)},
      {"grad_tolerance", format_double(c.solver.grad_tolerance)},
      {"fd_step", format_double(c.solver.fd_step)},
      {"lbfgs_memory", std::to_string(c.solver.lbfgs_memory)},
      {"armijo_c", format_double(c.solver.armijo_c)},
      {"backtrack_factor", format_double(c.solver.backtrack_factor)},
      {"max_backtracks", std::to_string(c.solver.max_backtracks)},
  });
  return out;
}

std::string scenario_to_text(const Scenario& s) {
  std::string out;
  for (const auto& [k, v] : scenario_entries(s)) out += k + " = " + v + "\n";
  return out;
}

std::vector<SweepCase> sweep_plan(const Scenario& base, const std::vector<double>& periods,
                                  double control_period) {
  if (!(control_period > 0.0)) throw ConfigError("control period must be positive");
  if (periods.empty()) throw ConfigError("sweep needs at least one period");
  std::vector<SweepCase> out;
  for (const double T : periods) {
    if (!(T > 0.0)) throw ConfigError("sweep periods must be positive");
    const double ratio = T / control_period;
    const long M = std::lround(ratio);
    if (M < 1 || std::abs(ratio - static_cast<double>(M)) > 1e-9 * std::max(1.0, ratio)) {
      throw ConfigError("period " + format_double(T) + " is not a multiple of the control period " +
                        format_double(control_period));
    }
    const auto round_up = [](int value, int multiple) { return ((value + multiple - 1) / multiple) * multiple; };

    SweepCase sc;
    sc.T = T;
    sc.M = static_cast<int>(M);
    Scenario common = base;
    common.config.T = T;
    common.config.M = 1;

    sc.conventional = common;
    sc.conventional.controller = ControllerKind::conventional;
    sc.conventional.name = base.name;

    sc.single_rate = common;
    sc.single_rate.controller = ControllerKind::lifted;
    sc.single_rate.name = base.name + "-single-rate";

    sc.multi_rate = common;
    sc.multi_rate.controller = ControllerKind::lifted;
    sc.multi_rate.name = base.name + "-multi-rate";
    sc.multi_rate.config.M = sc.M;
    sc.multi_rate.config.nprime = round_up(base.config.nprime, std::lcm(sc.M, 2));
    sc.multi_rate.config.fine_substeps = round_up(base.config.fine_substeps, sc.M);

    for (const Scenario* s : {&sc.conventional, &sc.single_rate, &sc.multi_rate}) s->validate();
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace lifted_nmpc
