#ifndef LIFTED_NMPC_LIFTING_HPP
#define LIFTED_NMPC_LIFTING_HPP

#include "lifted_nmpc/ode.hpp"
#include "lifted_nmpc/plant.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace lifted_nmpc {

/// Invalid controller or grid configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Piecewise-constant hold with M equal segments per period T.
/// M = 1 is the ordinary zero-order hold.
template <typename Scalar>
struct HoldSpec {
  int M = 1;
  int m = 1;
  Scalar T = Scalar(1);

  int decision_size() const { return m * M; }

  void validate() const {
    if (M < 1) throw ConfigError("upsampling must be >= 1");
    if (m < 1) throw ConfigError("input dimension must be >= 1");
    if (!(T > Scalar(0))) throw ConfigError("sampling period must be positive");
  }
};

/// Segment index i in [0, M) holding at theta, i.e. floor(theta M / T).
template <typename Scalar>
int hold_segment(const HoldSpec<Scalar>& spec, Scalar theta) {
  if (!(theta >= Scalar(0) && theta < spec.T)) {
    throw std::invalid_argument("hold_eval: theta must lie in [0, T)");
  }
  using std::floor;
  const int i = static_cast<int>(floor(theta * Scalar(spec.M) / spec.T));
  return i < spec.M ? i : spec.M - 1;
}

/// Segment value v_i of the stacked decision vector (v_1, ..., v_M).
template <typename Scalar>
Vector<Scalar> hold_segment_value(const HoldSpec<Scalar>& spec, const Vector<Scalar>& v, int segment) {
  return v.segment(static_cast<Eigen::Index>(segment) * spec.m, spec.m);
}

template <typename Scalar>
Vector<Scalar> hold_eval(const HoldSpec<Scalar>& spec, const Vector<Scalar>& v, Scalar theta) {
  if (v.size() != spec.decision_size()) {
    throw std::invalid_argument("hold_eval: decision vector must have length m*M");
  }
  return hold_segment_value(spec, v, hold_segment(spec, theta));
}

/// Per-period blocks of a uniformly sampled signal: block k, entry j is sample k*P + j.
template <typename T, typename Scalar = double>
struct LiftedSignal {
  Scalar period = Scalar(1);
  std::vector<std::vector<T>> blocks;

  std::vector<T> flatten() const {
    std::vector<T> out;
    for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
    return out;
  }
};

template <typename T, typename Scalar = double>
LiftedSignal<T, Scalar> lift_signal(const std::vector<T>& samples, Scalar period,
                                    int samples_per_period) {
  if (samples_per_period < 1) throw std::invalid_argument("lift_signal: samples_per_period must be >= 1");
  const auto per = static_cast<std::size_t>(samples_per_period);
  if (samples.size() % per != 0) {
    throw std::invalid_argument("lift_signal: sample count is not a multiple of samples_per_period");
  }
  LiftedSignal<T, Scalar> out;
  out.period = period;
  for (std::size_t k = 0; k < samples.size(); k += per) {
    out.blocks.emplace_back(samples.begin() + static_cast<std::ptrdiff_t>(k),
                            samples.begin() + static_cast<std::ptrdiff_t>(k + per));
  }
  return out;
}

/// FSFH approximation of one period of the lifted state: states[j] ~ x(j T / N').
template <typename Scalar>
struct LiftedStateGrid {
  Scalar T = Scalar(1);
  int nprime = 1;
  std::vector<Vector<Scalar>> states;

  const Vector<Scalar>& front() const { return states.front(); }
  const Vector<Scalar>& back() const { return states.back(); }
  Scalar spacing() const { return T / Scalar(nprime); }
};

template <typename Scalar>
void check_subdivision(const HoldSpec<Scalar>& spec, int nprime) {
  spec.validate();
  if (nprime < 1) throw ConfigError("nprime must be >= 1");
  if (nprime % spec.M != 0) throw ConfigError("nprime must be a multiple of upsampling");
}

/// Integrates one period from x_init under the hold H(v). Each of the N' subdivisions
/// is covered by `substeps` RK4 steps of length T / (N' substeps) with the segment
/// value of that subdivision held, so (N', s) and (N' s, 1) share the same refined grid.
template <typename Scalar>
LiftedStateGrid<Scalar> fsfh_lift(const PlantModel<Scalar>& plant, const Vector<Scalar>& x_init,
                                  const HoldSpec<Scalar>& spec, const Vector<Scalar>& v, int nprime,
                                  int substeps = 1) {
  check_subdivision(spec, nprime);
  if (substeps < 1) throw ConfigError("substeps must be >= 1");
  if (v.size() != spec.decision_size()) {
    throw std::invalid_argument("fsfh_lift: decision vector must have length m*M");
  }
  if (x_init.size() != plant.n) throw std::invalid_argument("fsfh_lift: state dimension mismatch");

  const int refined = nprime * substeps;
  const Scalar h = spec.T / Scalar(refined);
  const int per_segment = refined / spec.M;

  LiftedStateGrid<Scalar> grid;
  grid.T = spec.T;
  grid.nprime = nprime;
  grid.states.reserve(static_cast<std::size_t>(nprime) + 1);
  grid.states.push_back(x_init);

  Vector<Scalar> x = x_init;
  Vector<Scalar> u;
  int current_segment = -1;
  for (int r = 0; r < refined; ++r) {
    const int segment = r / per_segment;
    if (segment != current_segment) {
      u = hold_segment_value(spec, v, segment);
      current_segment = segment;
    }
    x = rk4_step<Scalar>(plant.f, x, u, h);
    if ((r + 1) % substeps == 0) grid.states.push_back(x);
  }
  return grid;
}

/// Chains N periods: period k+1 starts at the theta = T endpoint of period k.
template <typename Scalar>
std::vector<LiftedStateGrid<Scalar>> chain_lift(const PlantModel<Scalar>& plant,
                                                const Vector<Scalar>& x0,
                                                const HoldSpec<Scalar>& spec,
                                                const std::vector<Vector<Scalar>>& v_seq,
                                                int nprime, int substeps = 1) {
  if (v_seq.empty()) throw std::invalid_argument("chain_lift: decision sequence is empty");
  std::vector<LiftedStateGrid<Scalar>> grids;
  grids.reserve(v_seq.size());
  const Vector<Scalar>* start = &x0;
  for (const auto& v : v_seq) {
    grids.push_back(fsfh_lift(plant, *start, spec, v, nprime, substeps));
    start = &grids.back().states.back();
  }
  return grids;
}

/// Splits a stacked horizon vector (N blocks of m*M) into per-period decision vectors.
template <typename Scalar>
std::vector<Vector<Scalar>> split_horizon(const Vector<Scalar>& stacked, int block) {
  if (block < 1 || stacked.size() % block != 0) {
    throw std::invalid_argument("split_horizon: length is not a multiple of the block size");
  }
  std::vector<Vector<Scalar>> out;
  for (Eigen::Index k = 0; k < stacked.size(); k += block) out.push_back(stacked.segment(k, block));
  return out;
}

template <typename Scalar>
Vector<Scalar> stack_horizon(const std::vector<Vector<Scalar>>& blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.size();
  Vector<Scalar> out(total);
  Eigen::Index offset = 0;
  for (const auto& b : blocks) {
    out.segment(offset, b.size()) = b;
    offset += b.size();
  }
  return out;
}

}  // namespace lifted_nmpc

#endif  // LIFTED_NMPC_LIFTING_HPP
