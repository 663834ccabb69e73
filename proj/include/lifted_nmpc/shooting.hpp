#ifndef LIFTED_NMPC_SHOOTING_HPP
#define LIFTED_NMPC_SHOOTING_HPP

#include "lifted_nmpc/cost.hpp"
#include "lifted_nmpc/lifting.hpp"
#include "lifted_nmpc/plant.hpp"

#include <stdexcept>
#include <vector>

namespace lifted_nmpc {

/// Single-shooting cost written over the refined RK4 grid x_0 .. x_R:
///
///   J(v) = sum_r w_r x_r'Q x_r + x_R'Qf x_R + effort_scale * sum_s v_s'R v_s
///          + rho * (box penalty on flagged states) + rho * (terminal box penalty on x_R)
///
/// where step r holds the input slice v.segment(input_offset[r], m) and v_s runs over
/// all m-sized slices of v. Both the lifted and the sampled-instant objectives fit
/// this form, which admits an exact discrete-adjoint gradient.
template <typename Scalar>
struct ShootingLayout {
  int m = 1;
  Scalar h = Scalar(0);
  std::vector<int> input_offset;     ///< per refined step
  std::vector<Scalar> state_weight;  ///< per refined state (size R+1)
  std::vector<char> penalized;       ///< per refined state (size R+1)
  Scalar effort_scale = Scalar(1);

  int steps() const { return static_cast<int>(input_offset.size()); }
};

/// Layout of the lifted objective: N periods of N' single-step subdivisions,
/// Simpson weights per period, M hold segments per period.
template <typename Scalar>
ShootingLayout<Scalar> lifted_layout(const HoldSpec<Scalar>& spec, int horizon, int nprime,
                                     CostNormalization normalization) {
  check_subdivision(spec, nprime);
  if (nprime % 2 != 0) throw ConfigError("nprime must be even");
  ShootingLayout<Scalar> out;
  out.m = spec.m;
  out.h = spec.T / Scalar(nprime);
  const int steps = horizon * nprime;
  out.input_offset.resize(static_cast<std::size_t>(steps));
  out.state_weight.assign(static_cast<std::size_t>(steps) + 1, Scalar(0));
  out.penalized.assign(static_cast<std::size_t>(steps) + 1, 1);

  const int per_segment = nprime / spec.M;
  const Scalar scale = normalization == CostNormalization::integral ? Scalar(1) : Scalar(1) / spec.T;
  for (int k = 0; k < horizon; ++k) {
    for (int j = 0; j < nprime; ++j) {
      const int segment = j / per_segment;
      out.input_offset[static_cast<std::size_t>(k * nprime + j)] = (k * spec.M + segment) * spec.m;
    }
    for (int j = 0; j <= nprime; ++j) {
      const Scalar simpson = (j == 0 || j == nprime) ? Scalar(1) : (j % 2 == 1 ? Scalar(4) : Scalar(2));
      out.state_weight[static_cast<std::size_t>(k * nprime + j)] += scale * out.h / Scalar(3) * simpson;
    }
  }
  out.effort_scale =
      normalization == CostNormalization::integral ? spec.T / Scalar(spec.M) : Scalar(1) / Scalar(spec.M);
  return out;
}

/// Layout of the sampled-instant objective: the discrete model is `substeps` RK4
/// steps per period and stage costs apply at period starts only.
template <typename Scalar>
ShootingLayout<Scalar> conventional_layout(Scalar period, int horizon, int substeps, int m) {
  ShootingLayout<Scalar> out;
  out.m = m;
  out.h = period / Scalar(substeps);
  const int steps = horizon * substeps;
  out.input_offset.resize(static_cast<std::size_t>(steps));
  out.state_weight.assign(static_cast<std::size_t>(steps) + 1, Scalar(0));
  out.penalized.assign(static_cast<std::size_t>(steps) + 1, 0);
  for (int r = 0; r < steps; ++r) out.input_offset[static_cast<std::size_t>(r)] = (r / substeps) * m;
  for (int k = 0; k < horizon; ++k) out.state_weight[static_cast<std::size_t>(k * substeps)] = Scalar(1);
  for (int k = 1; k <= horizon; ++k) out.penalized[static_cast<std::size_t>(k * substeps)] = 1;
  out.effort_scale = Scalar(1);
  return out;
}

template <typename Scalar>
struct ShootingCost {
  PlantModel<Scalar> plant;
  ShootingLayout<Scalar> layout;
  QuadraticWeights<Scalar> weights;
  BoxSet<Scalar> state_box;
  BoxSet<Scalar> terminal_box;
  Scalar rho = Scalar(0);

  Scalar value(const Vector<Scalar>& x0, const Vector<Scalar>& v) const {
    std::vector<Vector<Scalar>> xs;
    return forward(x0, v, xs);
  }

  /// Cost, exact gradient and Gauss-Newton Hessian from forward sensitivities
  /// S_r = dx_r/dv propagated through the linearized RK4 steps.
  Scalar gauss_newton(const Vector<Scalar>& x0, const Vector<Scalar>& v, Vector<Scalar>& grad,
                      Matrix<Scalar>& hess) const {
    std::vector<Vector<Scalar>> xs;
    const Scalar J = forward(x0, v, xs);
    const int R = layout.steps();
    const int m = layout.m;
    const Eigen::Index n = x0.size();
    const Eigen::Index dim = v.size();
    grad = Vector<Scalar>::Zero(dim);
    hess = Matrix<Scalar>::Zero(dim, dim);

    Matrix<Scalar> S = Matrix<Scalar>::Zero(n, dim);
    Matrix<Scalar> Phi, Gamma;
    auto accumulate = [&](const Vector<Scalar>& x, int r) {
      const Scalar w = layout.state_weight[static_cast<std::size_t>(r)];
      Matrix<Scalar> W = Scalar(2) * w * weights.Q;
      if (r == R) W += Scalar(2) * weights.Qf;
      Vector<Scalar> gx = W * x;
      auto add_box = [&](const BoxSet<Scalar>& box) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (x[i] < box.lower[i]) {
            W(i, i) += Scalar(2) * rho;
            gx[i] += Scalar(2) * rho * (x[i] - box.lower[i]);
          } else if (x[i] > box.upper[i]) {
            W(i, i) += Scalar(2) * rho;
            gx[i] += Scalar(2) * rho * (x[i] - box.upper[i]);
          }
        }
      };
      if (penalize_state(r)) add_box(state_box);
      if (r == R && rho > Scalar(0) && !terminal_box.is_unbounded()) add_box(terminal_box);
      if (W.isZero(Scalar(0))) return;
      grad.noalias() += S.transpose() * gx;
      hess.noalias() += S.transpose() * (W * S);
    };

    for (int r = 0; r < R; ++r) {
      accumulate(xs[static_cast<std::size_t>(r)], r);
      const int offset = layout.input_offset[static_cast<std::size_t>(r)];
      step_jacobian(xs[static_cast<std::size_t>(r)], v.segment(offset, m), Phi, Gamma);
      S = Phi * S;
      S.middleCols(offset, m) += Gamma;
    }
    accumulate(xs[static_cast<std::size_t>(R)], R);

    for (Eigen::Index s = 0; s + m <= dim; s += m) {
      grad.segment(s, m) += Scalar(2) * layout.effort_scale * (weights.R * v.segment(s, m));
      hess.block(s, s, m, m) += Scalar(2) * layout.effort_scale * weights.R;
    }
    return J;
  }

  /// Jacobians of one RK4 step x+ = Psi(x, u): Phi = dPsi/dx, Gamma = dPsi/du.
  void step_jacobian(const Vector<Scalar>& x, const Vector<Scalar>& u, Matrix<Scalar>& Phi,
                     Matrix<Scalar>& Gamma) const {
    const Scalar h = layout.h;
    const Eigen::Index n = x.size();
    const Eigen::Index m = u.size();
    Matrix<Scalar> A, B;

    const Vector<Scalar> k1 = plant.f(x, u);
    plant.linearize(x, u, A, B);
    Matrix<Scalar> dk1x = A, dk1u = B;

    const Vector<Scalar> p2 = x + (h / Scalar(2)) * k1;
    const Vector<Scalar> k2 = plant.f(p2, u);
    plant.linearize(p2, u, A, B);
    const Matrix<Scalar> id = Matrix<Scalar>::Identity(n, n);
    Matrix<Scalar> dk2x = A * (id + (h / Scalar(2)) * dk1x);
    Matrix<Scalar> dk2u = A * ((h / Scalar(2)) * dk1u) + B;

    const Vector<Scalar> p3 = x + (h / Scalar(2)) * k2;
    const Vector<Scalar> k3 = plant.f(p3, u);
    plant.linearize(p3, u, A, B);
    Matrix<Scalar> dk3x = A * (id + (h / Scalar(2)) * dk2x);
    Matrix<Scalar> dk3u = A * ((h / Scalar(2)) * dk2u) + B;

    const Vector<Scalar> p4 = x + h * k3;
    plant.linearize(p4, u, A, B);
    Matrix<Scalar> dk4x = A * (id + h * dk3x);
    Matrix<Scalar> dk4u = A * (h * dk3u) + B;

    Phi = id + (h / Scalar(6)) * (dk1x + Scalar(2) * dk2x + Scalar(2) * dk3x + dk4x);
    Gamma = (h / Scalar(6)) * (dk1u + Scalar(2) * dk2u + Scalar(2) * dk3u + dk4u);
    (void)m;
  }

  /// Cost and its exact gradient with respect to v (reverse sweep through the RK4 steps).
  Scalar value_and_gradient(const Vector<Scalar>& x0, const Vector<Scalar>& v, Vector<Scalar>& grad) const {
    std::vector<Vector<Scalar>> xs;
    const Scalar J = forward(x0, v, xs);
    grad = Vector<Scalar>::Zero(v.size());
    const int R = layout.steps();
    const int m = layout.m;

    Vector<Scalar> lambda = local_gradient(xs[static_cast<std::size_t>(R)], R) +
                            Scalar(2) * (weights.Qf * xs[static_cast<std::size_t>(R)]);
    if (!terminal_box.is_unbounded()) lambda += penalty_gradient(xs[static_cast<std::size_t>(R)], terminal_box);

    Matrix<Scalar> A[4], B[4];
    const Scalar h = layout.h;
    for (int r = R - 1; r >= 0; --r) {
      const Vector<Scalar>& x = xs[static_cast<std::size_t>(r)];
      const int offset = layout.input_offset[static_cast<std::size_t>(r)];
      const Vector<Scalar> u = v.segment(offset, m);

      const Vector<Scalar> k1 = plant.f(x, u);
      const Vector<Scalar> p2 = x + (h / Scalar(2)) * k1;
      const Vector<Scalar> k2 = plant.f(p2, u);
      const Vector<Scalar> p3 = x + (h / Scalar(2)) * k2;
      const Vector<Scalar> k3 = plant.f(p3, u);
      const Vector<Scalar> p4 = x + h * k3;
      plant.linearize(x, u, A[0], B[0]);
      plant.linearize(p2, u, A[1], B[1]);
      plant.linearize(p3, u, A[2], B[2]);
      plant.linearize(p4, u, A[3], B[3]);

      // adjoints of k1..k4 from x+ = x + h/6 (k1 + 2 k2 + 2 k3 + k4)
      Vector<Scalar> a4 = (h / Scalar(6)) * lambda;
      Vector<Scalar> a3 = (h / Scalar(3)) * lambda;
      Vector<Scalar> a2 = (h / Scalar(3)) * lambda;
      Vector<Scalar> a1 = (h / Scalar(6)) * lambda;
      Vector<Scalar> x_bar = lambda;
      Vector<Scalar> u_bar = Vector<Scalar>::Zero(m);

      Vector<Scalar> t = A[3].transpose() * a4;
      x_bar += t;
      u_bar += B[3].transpose() * a4;
      a3 += h * t;

      t = A[2].transpose() * a3;
      x_bar += t;
      u_bar += B[2].transpose() * a3;
      a2 += (h / Scalar(2)) * t;

      t = A[1].transpose() * a2;
      x_bar += t;
      u_bar += B[1].transpose() * a2;
      a1 += (h / Scalar(2)) * t;

      x_bar += A[0].transpose() * a1;
      u_bar += B[0].transpose() * a1;

      grad.segment(offset, m) += u_bar;
      lambda = x_bar + local_gradient(x, r);
    }

    for (Eigen::Index s = 0; s + m <= v.size(); s += m) {
      grad.segment(s, m) += Scalar(2) * layout.effort_scale * (weights.R * v.segment(s, m));
    }
    return J;
  }

 private:
  Scalar forward(const Vector<Scalar>& x0, const Vector<Scalar>& v, std::vector<Vector<Scalar>>& xs) const {
    const int R = layout.steps();
    const int m = layout.m;
    xs.clear();
    xs.reserve(static_cast<std::size_t>(R) + 1);
    xs.push_back(x0);
    Scalar J(0);
    for (int r = 0; r < R; ++r) {
      const Vector<Scalar>& x = xs.back();
      J += local_value(x, r);
      const int offset = layout.input_offset[static_cast<std::size_t>(r)];
      xs.push_back(rk4_step<Scalar>(plant.f, x, v.segment(offset, m), layout.h));
    }
    const Vector<Scalar>& xr = xs.back();
    J += local_value(xr, R) + quad_form(xr, weights.Qf);
    if (!terminal_box.is_unbounded()) J += point_penalty(xr, terminal_box, rho);
    for (Eigen::Index s = 0; s + m <= v.size(); s += m) {
      const Vector<Scalar> vs = v.segment(s, m);
      J += layout.effort_scale * quad_form(vs, weights.R);
    }
    return J;
  }

  bool penalize_state(int r) const {
    return rho > Scalar(0) && layout.penalized[static_cast<std::size_t>(r)] && !state_box.is_unbounded();
  }

  Scalar local_value(const Vector<Scalar>& x, int r) const {
    Scalar c(0);
    const Scalar w = layout.state_weight[static_cast<std::size_t>(r)];
    if (w != Scalar(0)) c += w * quad_form(x, weights.Q);
    if (penalize_state(r)) c += point_penalty(x, state_box, rho);
    return c;
  }

  Vector<Scalar> local_gradient(const Vector<Scalar>& x, int r) const {
    Vector<Scalar> g = Scalar(2) * layout.state_weight[static_cast<std::size_t>(r)] * (weights.Q * x);
    if (penalize_state(r)) g += penalty_gradient(x, state_box);
    return g;
  }

  Vector<Scalar> penalty_gradient(const Vector<Scalar>& x, const BoxSet<Scalar>& box) const {
    const Vector<Scalar> below = (box.lower - x).cwiseMax(Scalar(0));
    const Vector<Scalar> above = (x - box.upper).cwiseMax(Scalar(0));
    return Scalar(2) * rho * (above - below);
  }
};

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_SHOOTING_HPP
