#ifndef LIFTED_NMPC_ODE_HPP
#define LIFTED_NMPC_ODE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lifted_nmpc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Controlled vector field x' = f(x, u).
template <typename Scalar>
using Dynamics = std::function<Vector<Scalar>(const Vector<Scalar>&, const Vector<Scalar>&)>;

/// Input signal u(t).
template <typename Scalar>
using InputSignal = std::function<Vector<Scalar>(Scalar)>;

/// Raised when a Runge-Kutta stage produces a non-finite derivative or state.
class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(int stage)
      : std::runtime_error("integration failure: non-finite value at RK4 stage " +
                           std::to_string(stage)),
        stage_(stage) {}

  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

/// One classical fourth-order Runge-Kutta step with the input held at u.
/// Stage index 5 denotes the combined update.
template <typename Scalar>
Vector<Scalar> rk4_step(const Dynamics<Scalar>& f, const Vector<Scalar>& x,
                        const Vector<Scalar>& u, Scalar h) {
  if (!(h > Scalar(0))) throw std::invalid_argument("rk4_step: step must be positive");
  const Scalar half = h / Scalar(2);

  Vector<Scalar> k1 = f(x, u);
  if (!all_finite(k1)) throw IntegrationError(1);
  Vector<Scalar> k2 = f(x + half * k1, u);
  if (!all_finite(k2)) throw IntegrationError(2);
  Vector<Scalar> k3 = f(x + half * k2, u);
  if (!all_finite(k3)) throw IntegrationError(3);
  Vector<Scalar> k4 = f(x + h * k3, u);
  if (!all_finite(k4)) throw IntegrationError(4);

  Vector<Scalar> next = x + (h / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
  if (!all_finite(next)) throw IntegrationError(5);
  return next;
}

/// States at every point of t_grid, with `substeps` RK4 steps per grid cell.
/// The input is sampled at the left end of each refined step, so it must be
/// piecewise constant with breakpoints on the refined grid.
template <typename Scalar>
std::vector<Vector<Scalar>> integrate_grid(const Dynamics<Scalar>& f, const Vector<Scalar>& x0,
                                           const InputSignal<Scalar>& u_of_t,
                                           const std::vector<Scalar>& t_grid, int substeps) {
  if (t_grid.empty()) throw std::invalid_argument("integrate_grid: empty time grid");
  if (substeps < 1) throw std::invalid_argument("integrate_grid: substeps must be >= 1");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) {
      throw std::invalid_argument("integrate_grid: time grid must be strictly increasing");
    }
  }

  std::vector<Vector<Scalar>> out;
  out.reserve(t_grid.size());
  out.push_back(x0);
  Vector<Scalar> x = x0;
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const Scalar t0 = t_grid[i - 1];
    const Scalar h = (t_grid[i] - t0) / Scalar(substeps);
    for (int s = 0; s < substeps; ++s) {
      x = rk4_step<Scalar>(f, x, u_of_t(t0 + Scalar(s) * h), h);
    }
    out.push_back(x);
  }
  return out;
}

/// Matrix exponential by scaling and squaring around a degree-13 Taylor core.
/// The argument is scaled by 2^-s until its 1-norm is at most 0.5.
template <typename Derived>
Matrix<typename Derived::Scalar> expm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  const Eigen::Index n = a.rows();

  const Scalar norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  Scalar scale(1);
  while (norm1 * scale > Scalar(0.5)) {
    scale /= Scalar(2);
    ++squarings;
  }
  const Matrix<Scalar> scaled = a * scale;

  // Horner: I + A(I + A/2(I + A/3(... (I + A/13))))
  const Matrix<Scalar> id = Matrix<Scalar>::Identity(n, n);
  Matrix<Scalar> result = id;
  for (int k = 13; k >= 1; --k) {
    result = id + (scaled * result) / Scalar(k);
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

/// Continuous-time LTI plant x' = Ax + Bu, y = Cx.
template <typename Scalar>
struct LinearPlant {
  Matrix<Scalar> A;
  Matrix<Scalar> B;
  Matrix<Scalar> C;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }

  void validate() const {
    if (A.rows() != A.cols()) throw std::invalid_argument("LinearPlant: A must be square");
    if (B.rows() != A.rows()) throw std::invalid_argument("LinearPlant: B rows must match A");
    if (C.cols() != A.rows()) throw std::invalid_argument("LinearPlant: C cols must match A");
  }
};

template <typename Scalar>
struct DiscreteLinear {
  Matrix<Scalar> Ad;
  Matrix<Scalar> Bd;
};

/// Zero-order-hold discretization: Ad = e^{AT}, Bd = int_0^T e^{As} B ds, read
/// off the exponential of the augmented matrix [[A, B], [0, 0]] T.
template <typename Scalar>
DiscreteLinear<Scalar> discretize_linear(const LinearPlant<Scalar>& plant, Scalar period) {
  if (plant.A.rows() != plant.A.cols() || plant.B.rows() != plant.A.rows()) {
    throw std::invalid_argument("discretize_linear: dimension mismatch between A and B");
  }
  if (!(period > Scalar(0))) throw std::invalid_argument("discretize_linear: T must be positive");
  const Eigen::Index n = plant.A.rows();
  const Eigen::Index m = plant.B.cols();

  Matrix<Scalar> aug = Matrix<Scalar>::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = plant.A * period;
  aug.topRightCorner(n, m) = plant.B * period;
  const Matrix<Scalar> e = expm(aug);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

template <typename Scalar>
struct LiftedSample {
  Vector<Scalar> state;
  Vector<Scalar> output;
};

/// Exact lifted state/output samples at theta_j = j T / grid_count, j = 0..grid_count,
/// for an input held constant at v over the period.
template <typename Scalar>
std::vector<LiftedSample<Scalar>> linear_lift_reference(const LinearPlant<Scalar>& plant,
                                                        const Vector<Scalar>& x_k,
                                                        const Vector<Scalar>& v, Scalar period,
                                                        int grid_count) {
  plant.validate();
  if (grid_count < 1) throw std::invalid_argument("linear_lift_reference: grid_count must be >= 1");
  if (x_k.size() != plant.states() || v.size() != plant.inputs()) {
    throw std::invalid_argument("linear_lift_reference: state or input dimension mismatch");
  }

  std::vector<LiftedSample<Scalar>> out;
  out.reserve(static_cast<std::size_t>(grid_count) + 1);
  out.push_back({x_k, plant.C * x_k});
  for (int j = 1; j <= grid_count; ++j) {
    const Scalar theta = period * Scalar(j) / Scalar(grid_count);
    const auto d = discretize_linear(plant, theta);
    Vector<Scalar> x = d.Ad * x_k + d.Bd * v;
    Vector<Scalar> y = plant.C * x;
    out.push_back({std::move(x), std::move(y)});
  }
  return out;
}

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_ODE_HPP
