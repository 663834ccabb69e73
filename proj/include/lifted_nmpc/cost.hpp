#ifndef LIFTED_NMPC_COST_HPP
#define LIFTED_NMPC_COST_HPP

#include "lifted_nmpc/lifting.hpp"
#include "lifted_nmpc/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace lifted_nmpc {

/// Stage cost x'Qx + u'Ru and terminal cost x'Qf x.
template <typename Scalar>
struct QuadraticWeights {
  Matrix<Scalar> Q;
  Matrix<Scalar> R;
  Matrix<Scalar> Qf;

  /// Throws ConfigError naming the offending weight.
  void validate(Eigen::Index n, Eigen::Index m) const {
    check_psd(Q, n, "Q");
    check_psd(Qf, n, "Qf");
    if (R.rows() != m || R.cols() != m) throw ConfigError("R must be m x m");
    if (!is_symmetric(R)) throw ConfigError("R must be symmetric");
    Eigen::LLT<Matrix<Scalar>> llt(R);
    if (llt.info() != Eigen::Success) throw ConfigError("R must be positive definite");
  }

 private:
  static bool is_symmetric(const Matrix<Scalar>& a) {
    const Scalar scale = std::max(Scalar(1), a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-12) * scale;
  }

  static void check_psd(const Matrix<Scalar>& a, Eigen::Index n, const char* name) {
    if (a.rows() != n || a.cols() != n) throw ConfigError(std::string(name) + " must be n x n");
    if (!is_symmetric(a)) throw ConfigError(std::string(name) + " must be symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(a, Eigen::EigenvaluesOnly);
    const Scalar scale = std::max(Scalar(1), a.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -Scalar(1e-12) * scale) {
      throw ConfigError(std::string(name) + " must be positive semidefinite");
    }
  }
};

/// Axis-aligned box; bounds may be infinite.
template <typename Scalar>
struct BoxSet {
  Vector<Scalar> lower;
  Vector<Scalar> upper;

  static BoxSet unbounded(Eigen::Index n) {
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    return {Vector<Scalar>::Constant(n, -inf), Vector<Scalar>::Constant(n, inf)};
  }

  static BoxSet uniform(Eigen::Index n, Scalar lo, Scalar hi) {
    return {Vector<Scalar>::Constant(n, lo), Vector<Scalar>::Constant(n, hi)};
  }

  Eigen::Index size() const { return lower.size(); }

  bool is_unbounded() const {
    return lower.array().isInf().all() && upper.array().isInf().all() &&
           (lower.array() < Scalar(0)).all() && (upper.array() > Scalar(0)).all();
  }

  /// Stacks `times` copies of this box.
  BoxSet replicate(int times) const {
    return {lower.replicate(times, 1), upper.replicate(times, 1)};
  }

  void validate(const char* name) const {
    if (lower.size() != upper.size()) {
      throw ConfigError(std::string(name) + ": lower and upper bounds differ in length");
    }
    if ((lower.array() > upper.array()).any() || lower.hasNaN() || upper.hasNaN()) {
      throw ConfigError(std::string(name) + ": lower bound exceeds upper bound");
    }
  }
};

enum class CostNormalization {
  integral,    ///< integral of the stage cost over each period
  per_sample,  ///< period-averaged state term plus a 1/M-weighted input term
};

/// Composite Simpson rule on an odd number (>= 3) of uniformly spaced samples.
template <typename Scalar>
Scalar simpson_integrate(std::span<const Scalar> samples, Scalar h) {
  const std::size_t count = samples.size();
  if (count < 3 || count % 2 == 0) {
    throw std::invalid_argument("simpson_integrate: need an odd number (>= 3) of samples");
  }
  if (!(h > Scalar(0))) throw std::invalid_argument("simpson_integrate: spacing must be positive");
  Scalar odd(0), even(0);
  for (std::size_t i = 1; i + 1 < count; ++i) {
    if (i % 2 == 1) {
      odd += samples[i];
    } else {
      even += samples[i];
    }
  }
  return h / Scalar(3) * (samples.front() + Scalar(4) * odd + Scalar(2) * even + samples.back());
}

template <typename Scalar>
Scalar simpson_integrate(const std::vector<Scalar>& samples, Scalar h) {
  return simpson_integrate(std::span<const Scalar>(samples), h);
}

template <typename Scalar>
Scalar quad_form(const Vector<Scalar>& x, const Matrix<Scalar>& W) {
  return x.dot(W * x);
}

template <typename Scalar>
Scalar lifted_period_cost(const LiftedStateGrid<Scalar>& grid, const HoldSpec<Scalar>& spec,
                          const Vector<Scalar>& v, const QuadraticWeights<Scalar>& w,
                          CostNormalization normalization = CostNormalization::integral) {
  const int nprime = grid.nprime;
  if (static_cast<int>(grid.states.size()) != nprime + 1) {
    throw std::invalid_argument("lifted_period_cost: grid must hold N'+1 states");
  }
  if (nprime % 2 != 0) throw std::invalid_argument("lifted_period_cost: N' must be even");
  if (nprime % spec.M != 0) throw std::invalid_argument("lifted_period_cost: N' must be a multiple of M");
  if (v.size() != spec.decision_size()) {
    throw std::invalid_argument("lifted_period_cost: decision vector must have length m*M");
  }
  if (w.R.rows() != spec.m) throw std::invalid_argument("lifted_period_cost: R does not match m");
  if (w.Q.rows() != grid.states.front().size()) {
    throw std::invalid_argument("lifted_period_cost: Q does not match state dimension");
  }

  std::vector<Scalar> integrand(grid.states.size());
  for (std::size_t j = 0; j < grid.states.size(); ++j) integrand[j] = quad_form(grid.states[j], w.Q);
  const Scalar state_term = simpson_integrate(integrand, grid.T / Scalar(nprime));

  Scalar effort(0);
  for (int i = 0; i < spec.M; ++i) {
    const Vector<Scalar> vi = hold_segment_value(spec, v, i);
    effort += quad_form(vi, w.R);
  }

  if (normalization == CostNormalization::integral) {
    return state_term + grid.T / Scalar(spec.M) * effort;
  }
  return state_term / grid.T + effort / Scalar(spec.M);
}

/// Sum of per-period lifted costs plus the terminal cost on x[N](0).
template <typename Scalar>
Scalar lifted_total_cost(const std::vector<LiftedStateGrid<Scalar>>& grids,
                         const HoldSpec<Scalar>& spec, const std::vector<Vector<Scalar>>& v_seq,
                         const QuadraticWeights<Scalar>& w,
                         CostNormalization normalization = CostNormalization::integral) {
  if (grids.empty() || grids.size() != v_seq.size()) {
    throw std::invalid_argument("lifted_total_cost: grids and decisions must be non-empty and equal in length");
  }
  Scalar total(0);
  for (std::size_t k = 0; k < grids.size(); ++k) {
    total += lifted_period_cost(grids[k], spec, v_seq[k], w, normalization);
  }
  return total + quad_form(grids.back().states.back(), w.Qf);
}

/// Sampled-instant cost: sum of x_k'Qx_k + u_k'Ru_k for k < N plus x_N'Qf x_N.
template <typename Scalar>
Scalar conventional_total_cost(const std::vector<Vector<Scalar>>& x_seq,
                               const std::vector<Vector<Scalar>>& u_seq,
                               const QuadraticWeights<Scalar>& w) {
  if (u_seq.empty() || x_seq.size() != u_seq.size() + 1) {
    throw std::invalid_argument("conventional_total_cost: need N+1 states and N inputs");
  }
  Scalar total(0);
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    total += quad_form(x_seq[k], w.Q) + quad_form(u_seq[k], w.R);
  }
  return total + quad_form(x_seq.back(), w.Qf);
}

template <typename Scalar>
struct BoxViolation {
  Scalar max_violation = Scalar(0);
  std::size_t index = 0;
};

/// Largest coordinate-wise distance outside the box over all points; 0 means feasible.
template <typename Scalar>
BoxViolation<Scalar> box_violation(const std::vector<Vector<Scalar>>& points, const BoxSet<Scalar>& set) {
  BoxViolation<Scalar> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    const Scalar worst = std::max((set.lower - p).maxCoeff(), (p - set.upper).maxCoeff());
    if (worst > out.max_violation) {
      out.max_violation = worst;
      out.index = i;
    }
  }
  return out;
}

/// rho times the squared coordinate-wise violation of a single point.
template <typename Scalar>
Scalar point_penalty(const Vector<Scalar>& p, const BoxSet<Scalar>& set, Scalar rho) {
  if (rho == Scalar(0)) return Scalar(0);
  const Vector<Scalar> below = (set.lower - p).cwiseMax(Scalar(0));
  const Vector<Scalar> above = (p - set.upper).cwiseMax(Scalar(0));
  return rho * (below.squaredNorm() + above.squaredNorm());
}

/// Soft state constraint over every distinct FSFH grid point of a chained horizon.
template <typename Scalar>
Scalar state_penalty(const std::vector<LiftedStateGrid<Scalar>>& grids, const BoxSet<Scalar>& set,
                     Scalar rho) {
  if (rho == Scalar(0) || set.is_unbounded()) return Scalar(0);
  Scalar total(0);
  for (std::size_t k = 0; k < grids.size(); ++k) {
    // grid k starts where grid k-1 ended
    const std::size_t first = k == 0 ? 0 : 1;
    for (std::size_t j = first; j < grids[k].states.size(); ++j) {
      total += point_penalty(grids[k].states[j], set, rho);
    }
  }
  return total;
}

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_COST_HPP
