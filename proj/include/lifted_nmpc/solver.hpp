#ifndef LIFTED_NMPC_SOLVER_HPP
#define LIFTED_NMPC_SOLVER_HPP

#include "lifted_nmpc/cost.hpp"
#include "lifted_nmpc/ode.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lifted_nmpc {

template <typename Scalar>
using Objective = std::function<Scalar(const Vector<Scalar>&)>;

template <typename Scalar>
using Gradient = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

/// Objective returned a non-finite value. coordinate() is the perturbed
/// coordinate of a finite-difference probe, or -1 for the base point.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(int coordinate)
      : std::runtime_error(coordinate < 0
                               ? std::string("objective is not finite at the initial point")
                               : "objective is not finite when probing coordinate " +
                                     std::to_string(coordinate)),
        coordinate_(coordinate) {}

  int coordinate() const noexcept { return coordinate_; }

 private:
  int coordinate_;
};

template <typename Scalar>
struct SolverOptions {
  int max_iterations = 200;
  Scalar grad_tolerance = Scalar(1e-6);  ///< on the infinity norm of the projected gradient
  Scalar fd_step = Scalar(1e-6);
  int lbfgs_memory = 10;
  Scalar armijo_c = Scalar(1e-4);
  Scalar backtrack_factor = Scalar(0.5);
  int max_backtracks = 40;

  void validate() const {
    if (max_iterations < 1) throw ConfigError("solver.max_iterations must be >= 1");
    if (!(grad_tolerance > Scalar(0))) throw ConfigError("solver.grad_tolerance must be positive");
    if (!(fd_step > Scalar(0))) throw ConfigError("solver.fd_step must be positive");
    if (lbfgs_memory < 1) throw ConfigError("solver.lbfgs_memory must be >= 1");
    if (!(armijo_c > Scalar(0) && armijo_c < Scalar(1))) throw ConfigError("solver.armijo_c must lie in (0, 1)");
    if (!(backtrack_factor > Scalar(0) && backtrack_factor < Scalar(1))) {
      throw ConfigError("solver.backtrack_factor must lie in (0, 1)");
    }
    if (max_backtracks < 1) throw ConfigError("solver.max_backtracks must be >= 1");
  }
};

template <typename Scalar>
struct SolveResult {
  Vector<Scalar> v_star;
  Scalar cost = Scalar(0);
  int iterations = 0;
  bool converged = false;
  Scalar projected_grad_norm = Scalar(0);
  int evaluations = 0;
};

/// Central differences (f(x + s e_i) - f(x - s e_i)) / 2s.
template <typename Scalar>
Vector<Scalar> fd_gradient(const Objective<Scalar>& objective, const Vector<Scalar>& x, Scalar step) {
  if (!(step > Scalar(0))) throw std::invalid_argument("fd_gradient: step must be positive");
  Vector<Scalar> g(x.size());
  Vector<Scalar> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const Scalar fp = objective(probe);
    probe[i] = x[i] - step;
    const Scalar fm = objective(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw EvaluationError(static_cast<int>(i));
    g[i] = (fp - fm) / (Scalar(2) * step);
  }
  return g;
}

template <typename Scalar>
Vector<Scalar> project_box(const Vector<Scalar>& x, const BoxSet<Scalar>& bounds) {
  if (bounds.size() != x.size()) throw std::invalid_argument("project_box: dimension mismatch");
  return x.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
}

namespace detail {

template <typename Scalar>
struct CurvaturePair {
  Vector<Scalar> s;
  Vector<Scalar> y;
};

/// Two-loop recursion applied to -g on the free coordinates only.
template <typename Scalar>
Vector<Scalar> lbfgs_direction(const std::deque<CurvaturePair<Scalar>>& history,
                               const Vector<Scalar>& g, const Vector<Scalar>& free_mask) {
  Vector<Scalar> q = g.cwiseProduct(free_mask);
  std::vector<Scalar> alpha(history.size(), Scalar(0));
  std::vector<Scalar> rho(history.size(), Scalar(0));
  std::vector<bool> usable(history.size(), false);
  Scalar gamma(1);
  bool have_gamma = false;

  for (std::size_t k = history.size(); k-- > 0;) {
    const Vector<Scalar> s = history[k].s.cwiseProduct(free_mask);
    const Vector<Scalar> y = history[k].y.cwiseProduct(free_mask);
    const Scalar sy = s.dot(y);
    if (!(sy > Scalar(0))) continue;
    usable[k] = true;
    rho[k] = Scalar(1) / sy;
    alpha[k] = rho[k] * s.dot(q);
    q -= alpha[k] * y;
    if (!have_gamma) {
      gamma = sy / y.squaredNorm();
      have_gamma = true;
    }
  }
  Vector<Scalar> r = gamma * q;
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (!usable[k]) continue;
    const Vector<Scalar> s = history[k].s.cwiseProduct(free_mask);
    const Vector<Scalar> y = history[k].y.cwiseProduct(free_mask);
    const Scalar beta = rho[k] * y.dot(r);
    r += s * (alpha[k] - beta);
  }
  return -r;
}

}  // namespace detail

/// Projected limited-memory quasi-Newton minimization over a box.
///
/// Coordinates sitting on a bound with the gradient pushing outward form the
/// active set and take the projected steepest-descent direction; the remaining
/// free coordinates take the L-BFGS direction. Steps are accepted by Armijo
/// backtracking along the projected arc P(x + a d), so every iterate is feasible
/// and the objective never increases. Gradients come from fd_gradient.
///
/// A line search that cannot make progress ends the solve with converged = false;
/// the best point found is always returned.
///
/// The overload taking `gradient` uses it in place of finite differences;
/// `evaluations` then counts each gradient call once.
template <typename Scalar>
SolveResult<Scalar> minimize_box(const Objective<Scalar>& objective, const Gradient<Scalar>& gradient_fn,
                                 const Vector<Scalar>& x0, const BoxSet<Scalar>& bounds,
                                 const SolverOptions<Scalar>& opts = {}) {
  opts.validate();
  bounds.validate("solver bounds");

  SolveResult<Scalar> res;
  int evaluations = 0;
  auto eval = [&](const Vector<Scalar>& v) {
    ++evaluations;
    return objective(v);
  };
  auto gradient = [&](const Vector<Scalar>& v) {
    if (gradient_fn) {
      ++evaluations;
      Vector<Scalar> g = gradient_fn(v);
      if (!g.allFinite()) throw EvaluationError(-1);
      return g;
    }
    evaluations += 2 * static_cast<int>(v.size());
    return fd_gradient(objective, v, opts.fd_step);
  };
  auto projected_gradient_norm = [&](const Vector<Scalar>& v, const Vector<Scalar>& g) {
    if (v.size() == 0) return Scalar(0);
    return (v - project_box<Scalar>(v - g, bounds)).template lpNorm<Eigen::Infinity>();
  };

  Vector<Scalar> x = project_box(x0, bounds);
  Scalar f = eval(x);
  if (!std::isfinite(f)) throw EvaluationError(-1);
  Vector<Scalar> g = gradient(x);

  std::deque<detail::CurvaturePair<Scalar>> history;
  const Eigen::Index dim = x.size();
  int iter = 0;
  Scalar pg_norm = projected_gradient_norm(x, g);

  while (true) {
    if (pg_norm <= opts.grad_tolerance) {
      res.converged = true;
      break;
    }
    if (iter >= opts.max_iterations) break;

    Vector<Scalar> free_mask = Vector<Scalar>::Ones(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const bool at_lower = x[i] <= bounds.lower[i] && g[i] > Scalar(0);
      const bool at_upper = x[i] >= bounds.upper[i] && g[i] < Scalar(0);
      if (at_lower || at_upper) free_mask[i] = Scalar(0);
    }

    Vector<Scalar> d = detail::lbfgs_direction(history, g, free_mask);
    if (!(g.cwiseProduct(free_mask).dot(d) < Scalar(0))) {
      history.clear();
      d = -g.cwiseProduct(free_mask);
    }
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (free_mask[i] == Scalar(0)) d[i] = -g[i];
    }

    Scalar step(1);
    if (history.empty()) {
      const Scalar dn = d.template lpNorm<Eigen::Infinity>();
      if (dn > Scalar(1)) step = Scalar(1) / dn;
    }

    bool accepted = false;
    Vector<Scalar> x_trial;
    Scalar f_trial(0);
    for (int b = 0; b < opts.max_backtracks; ++b) {
      x_trial = project_box<Scalar>(x + step * d, bounds);
      const Vector<Scalar> delta = x_trial - x;
      if (delta.isZero(Scalar(0))) break;
      f_trial = eval(x_trial);
      if (std::isfinite(f_trial) && f_trial <= f + opts.armijo_c * g.dot(delta)) {
        accepted = true;
        break;
      }
      step *= opts.backtrack_factor;
    }
    if (!accepted) break;

    const Vector<Scalar> g_trial = gradient(x_trial);
    detail::CurvaturePair<Scalar> pair{x_trial - x, g_trial - g};
    if (pair.s.dot(pair.y) > std::numeric_limits<Scalar>::epsilon() * pair.s.norm() * pair.y.norm()) {
      history.push_back(std::move(pair));
      if (static_cast<int>(history.size()) > opts.lbfgs_memory) history.pop_front();
    }
    x = std::move(x_trial);
    f = f_trial;
    g = g_trial;
    ++iter;
    pg_norm = projected_gradient_norm(x, g);
  }

  res.v_star = x;
  res.cost = f;
  res.iterations = iter;
  res.projected_grad_norm = pg_norm;
  res.evaluations = evaluations;
  return res;
}

template <typename Scalar>
SolveResult<Scalar> minimize_box(const Objective<Scalar>& objective, const Vector<Scalar>& x0,
                                 const BoxSet<Scalar>& bounds, const SolverOptions<Scalar>& opts = {}) {
  return minimize_box<Scalar>(objective, Gradient<Scalar>{}, x0, bounds, opts);
}

template <typename Scalar>
using QuadraticModel = std::function<Scalar(const Vector<Scalar>&, Vector<Scalar>&, Matrix<Scalar>&)>;

/// Projected Newton-type minimization over a box with a user-supplied quadratic
/// model (value, gradient, PSD Hessian approximation such as Gauss-Newton).
///
/// Uses the same free/active splitting as minimize_box, with an epsilon-active set
/// (coordinates within the projected-gradient norm of a bound, gradient pointing
/// outward). Free coordinates take the Levenberg-Marquardt step
/// -(H_FF + mu I)^{-1} g_F, active ones -g_i / H_ii; the step is accepted by Armijo
/// backtracking on the projected arc. mu shrinks after full steps and grows when
/// the line search struggles.
template <typename Scalar>
SolveResult<Scalar> minimize_box_newton(const Objective<Scalar>& objective, const QuadraticModel<Scalar>& model,
                                        const Vector<Scalar>& x0, const BoxSet<Scalar>& bounds,
                                        const SolverOptions<Scalar>& opts = {}) {
  opts.validate();
  bounds.validate("solver bounds");
  SolveResult<Scalar> res;
  int evaluations = 0;

  Vector<Scalar> x = project_box(x0, bounds);
  Vector<Scalar> g;
  Matrix<Scalar> H;
  Scalar f = model(x, g, H);
  ++evaluations;
  if (!std::isfinite(f) || !g.allFinite() || !H.allFinite()) throw EvaluationError(-1);

  const Eigen::Index dim = x.size();
  auto pg_of = [&](const Vector<Scalar>& v, const Vector<Scalar>& grad) {
    if (dim == 0) return Scalar(0);
    return (v - project_box<Scalar>(v - grad, bounds)).template lpNorm<Eigen::Infinity>();
  };

  const Scalar tiny = std::numeric_limits<Scalar>::epsilon();
  Scalar mu(0);
  int iter = 0;
  Scalar pg_norm = pg_of(x, g);

  while (true) {
    if (pg_norm <= opts.grad_tolerance) {
      res.converged = true;
      break;
    }
    if (iter >= opts.max_iterations) break;

    const Scalar scale = std::max(Scalar(1), H.diagonal().cwiseAbs().maxCoeff());
    const Scalar eps_active = std::min(pg_norm, Scalar(1e-3) * std::max(Scalar(1), (bounds.upper - bounds.lower)
                                                                                      .cwiseAbs()
                                                                                      .minCoeff()));
    std::vector<Eigen::Index> free_idx;
    std::vector<Eigen::Index> active_idx;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const bool near_lower = x[i] - bounds.lower[i] <= eps_active && g[i] > Scalar(0);
      const bool near_upper = bounds.upper[i] - x[i] <= eps_active && g[i] < Scalar(0);
      (near_lower || near_upper ? active_idx : free_idx).push_back(i);
    }

    bool accepted = false;
    Vector<Scalar> x_trial;
    Scalar f_trial(0);
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
      Vector<Scalar> d = Vector<Scalar>::Zero(dim);
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      if (nf > 0) {
        Matrix<Scalar> Hff(nf, nf);
        Vector<Scalar> gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
          gf[a] = g[free_idx[static_cast<std::size_t>(a)]];
          for (Eigen::Index b = 0; b < nf; ++b) {
            Hff(a, b) = H(free_idx[static_cast<std::size_t>(a)], free_idx[static_cast<std::size_t>(b)]);
          }
        }
        Hff.diagonal().array() += mu + tiny * scale;
        Eigen::LLT<Matrix<Scalar>> llt(Hff);
        if (llt.info() != Eigen::Success) {
          mu = std::max(Scalar(10) * mu, Scalar(1e-8) * scale);
          continue;
        }
        const Vector<Scalar> df = -llt.solve(gf);
        for (Eigen::Index a = 0; a < nf; ++a) d[free_idx[static_cast<std::size_t>(a)]] = df[a];
      }
      for (Eigen::Index i : active_idx) d[i] = -g[i] / std::max(H(i, i) + mu, tiny * scale);

      Scalar step(1);
      for (int b = 0; b < opts.max_backtracks; ++b) {
        x_trial = project_box<Scalar>(x + step * d, bounds);
        const Vector<Scalar> delta = x_trial - x;
        if (delta.isZero(Scalar(0))) break;
        f_trial = objective(x_trial);
        ++evaluations;
        if (std::isfinite(f_trial) && f_trial <= f + opts.armijo_c * g.dot(delta)) {
          accepted = true;
          break;
        }
        step *= opts.backtrack_factor;
      }
      if (accepted) {
        mu = step == Scalar(1) ? mu / Scalar(4) : std::max(Scalar(4) * mu, Scalar(1e-8) * scale);
        if (mu < Scalar(1e-12) * scale) mu = Scalar(0);
      } else {
        mu = std::max(Scalar(100) * mu, Scalar(1e-6) * scale);
      }
    }
    if (!accepted) break;

    x = std::move(x_trial);
    f = model(x, g, H);
    ++evaluations;
    if (!std::isfinite(f) || !g.allFinite() || !H.allFinite()) throw EvaluationError(-1);
    ++iter;
    pg_norm = pg_of(x, g);
  }

  res.v_star = x;
  res.cost = f;
  res.iterations = iter;
  res.projected_grad_norm = pg_norm;
  res.evaluations = evaluations;
  return res;
}

/// Receding-horizon warm start: drop the first block and repeat the last.
template <typename Scalar>
std::vector<Vector<Scalar>> warm_start_shift(const std::vector<Vector<Scalar>>& previous) {
  if (previous.empty()) throw std::invalid_argument("warm_start_shift: empty sequence");
  std::vector<Vector<Scalar>> out(previous.begin() + 1, previous.end());
  out.push_back(previous.back());
  return out;
}

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_SOLVER_HPP
