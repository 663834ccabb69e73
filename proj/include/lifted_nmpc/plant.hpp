#ifndef LIFTED_NMPC_PLANT_HPP
#define LIFTED_NMPC_PLANT_HPP

#include "lifted_nmpc/ode.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <type_traits>

namespace lifted_nmpc {

/// Fills A = df/dx (n x n) and B = df/du (n x m) at (x, u).
template <typename Scalar>
using JacobianFn = std::function<void(const Vector<Scalar>&, const Vector<Scalar>&, Matrix<Scalar>&,
                                      Matrix<Scalar>&)>;

/// Nonlinear plant x' = f(x, u), y = h(x).
template <typename Scalar>
struct PlantModel {
  std::string name;
  int n = 0;
  int m = 0;
  int p = 0;
  Dynamics<Scalar> f;
  std::function<Vector<Scalar>(const Vector<Scalar>&)> h;
  JacobianFn<Scalar> jacobian;  ///< optional; central differences of f when empty
  std::map<std::string, double> params;

  Vector<Scalar> output(const Vector<Scalar>& x) const { return h ? h(x) : x; }

  void linearize(const Vector<Scalar>& x, const Vector<Scalar>& u, Matrix<Scalar>& A,
                 Matrix<Scalar>& B) const {
    if (jacobian) {
      jacobian(x, u, A, B);
      return;
    }
    using std::abs;
    using std::max;
    A.resize(n, n);
    B.resize(n, m);
    Vector<Scalar> xp = x;
    Vector<Scalar> up = u;
    for (int i = 0; i < n; ++i) {
      const Scalar s = Scalar(1e-6) * max(Scalar(1), abs(x[i]));
      xp[i] = x[i] + s;
      const Vector<Scalar> fp = f(xp, u);
      xp[i] = x[i] - s;
      A.col(i) = (fp - f(xp, u)) / (Scalar(2) * s);
      xp[i] = x[i];
    }
    for (int i = 0; i < m; ++i) {
      const Scalar s = Scalar(1e-6) * max(Scalar(1), abs(u[i]));
      up[i] = u[i] + s;
      const Vector<Scalar> fp = f(x, up);
      up[i] = u[i] - s;
      B.col(i) = (fp - f(x, up)) / (Scalar(2) * s);
      up[i] = u[i];
    }
  }
};

/// Jacobian of a scalar-generic field `field(x, u)` by forward-mode automatic differentiation.
template <typename Field>
JacobianFn<double> autodiff_jacobian(int n, int m, Field field) {
  return [n, m, field](const Vector<double>& x, const Vector<double>& u, Matrix<double>& A,
                       Matrix<double>& B) {
    using Ad = Eigen::AutoDiffScalar<Eigen::VectorXd>;
    const int dirs = n + m;
    Vector<Ad> xa(n);
    Vector<Ad> ua(m);
    for (int i = 0; i < n; ++i) xa[i] = Ad(x[i], dirs, i);
    for (int i = 0; i < m; ++i) ua[i] = Ad(u[i], dirs, n + i);
    const Vector<Ad> dx = field(xa, ua);
    A.resize(n, n);
    B.resize(n, m);
    for (int r = 0; r < n; ++r) {
      const Eigen::VectorXd& d = dx[r].derivatives();
      if (d.size() == 0) {
        A.row(r).setZero();
        B.row(r).setZero();
        continue;
      }
      A.row(r) = d.head(n).transpose();
      B.row(r) = d.tail(m).transpose();
    }
  };
}

template <typename Scalar>
Vector<Scalar> vdp_dynamics(const Vector<Scalar>& x, const Vector<Scalar>& u, double mu) {
  Vector<Scalar> dx(2);
  dx[0] = x[1];
  dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0];
  return dx;
}

struct CartPoleParams {
  double g = 9.8;
  double l = 1.0;
  double m_c = 1.0;
  double m_p = 0.2;
};

/// State (cart position, pole angle from upright, cart velocity, pole rate); input is cart force.
template <typename Scalar>
Vector<Scalar> cartpole_dynamics(const Vector<Scalar>& x, const Vector<Scalar>& u,
                                 const CartPoleParams& prm) {
  using std::cos;
  using std::sin;
  const double g = prm.g, l = prm.l, mc = prm.m_c, mp = prm.m_p;
  const Scalar s = sin(x[1]);
  const Scalar c = cos(x[1]);
  const Scalar w2 = x[3] * x[3];
  const Scalar den = mc + mp * s * s;

  Vector<Scalar> dx(4);
  dx[0] = x[2];
  dx[1] = x[3];
  dx[2] = (-(mp * l) * w2 * s + (mp * g) * s * c + u[0]) / den;
  dx[3] = (-(mp * l) * w2 * s * c + ((mc + mp) * g) * s + u[0] * c) / (l * den);
  return dx;
}

template <typename Scalar>
PlantModel<Scalar> make_vdp_plant(double mu = 1.0) {
  PlantModel<Scalar> plant;
  plant.name = "vdp";
  plant.n = 2;
  plant.m = 1;
  plant.p = 2;
  plant.params["mu"] = mu;
  plant.f = [mu](const Vector<Scalar>& x, const Vector<Scalar>& u) {
    return vdp_dynamics<Scalar>(x, u, mu);
  };
  if constexpr (std::is_same_v<Scalar, double>) {
    plant.jacobian = autodiff_jacobian(2, 1, [mu](const auto& x, const auto& u) {
      using S = typename std::decay_t<decltype(x)>::Scalar;
      return vdp_dynamics<S>(x, u, mu);
    });
  }
  return plant;
}

template <typename Scalar>
PlantModel<Scalar> make_cartpole_plant(const CartPoleParams& prm = {}) {
  PlantModel<Scalar> plant;
  plant.name = "cartpole";
  plant.n = 4;
  plant.m = 1;
  plant.p = 4;
  plant.params = {{"g", prm.g}, {"l", prm.l}, {"m_c", prm.m_c}, {"m_p", prm.m_p}};
  plant.f = [prm](const Vector<Scalar>& x, const Vector<Scalar>& u) {
    return cartpole_dynamics<Scalar>(x, u, prm);
  };
  if constexpr (std::is_same_v<Scalar, double>) {
    plant.jacobian = autodiff_jacobian(4, 1, [prm](const auto& x, const auto& u) {
      using S = typename std::decay_t<decltype(x)>::Scalar;
      return cartpole_dynamics<S>(x, u, prm);
    });
  }
  return plant;
}

/// Wraps an LTI plant as a nonlinear plant model.
template <typename Scalar>
PlantModel<Scalar> make_linear_plant(const LinearPlant<Scalar>& lin, std::string name = "linear") {
  lin.validate();
  PlantModel<Scalar> plant;
  plant.name = std::move(name);
  plant.n = static_cast<int>(lin.states());
  plant.m = static_cast<int>(lin.inputs());
  plant.p = static_cast<int>(lin.outputs());
  plant.f = [lin](const Vector<Scalar>& x, const Vector<Scalar>& u) -> Vector<Scalar> {
    return lin.A * x + lin.B * u;
  };
  plant.h = [C = lin.C](const Vector<Scalar>& x) -> Vector<Scalar> { return C * x; };
  plant.jacobian = [lin](const Vector<Scalar>&, const Vector<Scalar>&, Matrix<Scalar>& A, Matrix<Scalar>& B) {
    A = lin.A;
    B = lin.B;
  };
  return plant;
}

/// Plant with f = 0 (everything stays where it starts).
template <typename Scalar>
PlantModel<Scalar> make_zero_plant(int n, int m) {
  PlantModel<Scalar> plant;
  plant.name = "zero";
  plant.n = n;
  plant.m = m;
  plant.p = n;
  plant.f = [n](const Vector<Scalar>&, const Vector<Scalar>&) -> Vector<Scalar> {
    return Vector<Scalar>::Zero(n);
  };
  plant.jacobian = [n, m](const Vector<Scalar>&, const Vector<Scalar>&, Matrix<Scalar>& A, Matrix<Scalar>& B) {
    A = Matrix<Scalar>::Zero(n, n);
    B = Matrix<Scalar>::Zero(n, m);
  };
  return plant;
}

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_PLANT_HPP
