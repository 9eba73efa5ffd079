#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluidmc/rng.hpp"

namespace fluidmc {

using State = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using Vec = Eigen::VectorXd;

using RateFn = std::function<double(const State&)>;
using CoordFn = std::function<Vec(const State&)>;
using ObservableFn = std::function<double(const State&)>;

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One reaction channel: a fixed integer jump applied at a state-dependent
/// rate. Jumps must be nonzero (self-jumps are invisible to the chain law).
struct Channel {
  State jump;
  RateFn rate;
  std::string name;
};

/// A continuous-time Markov chain on integer-vector states with finitely many
/// reaction channels, plus the coordinate map into R^d used for comparison
/// against a deterministic flow. Immutable after construction; safe to share
/// across worker threads.
struct ChainSpec {
  int dim = 0;  // state dimension
  std::vector<Channel> channels;
  CoordFn coord;
  int coord_dim = 0;  // d
  double scale_hint = 0.0;  // N for builtin models, 0 when unused

  void validate() const;
};

/// Piecewise-constant sample path, right-continuous with left limits.
/// times[k] is the k-th jump time (times[0] == 0); the path holds states[k]
/// on [times[k], times[k+1]) and states.back() up to `horizon`.
struct Trajectory {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<double> times;
  std::vector<State> states;
  double horizon = 0.0;
  bool terminated_absorbing = false;

  std::size_t segment_index(double t) const;
  const State& state_at(double t) const { return states[segment_index(t)]; }
};

/// Raised when a replica exceeds its event budget; carries the partial path
/// so the caller can inspect a suspected explosion.
struct BudgetExceededError : std::runtime_error {
  BudgetExceededError(const std::string& msg, Trajectory partial_path)
      : std::runtime_error(msg), partial(std::move(partial_path)) {}
  Trajectory partial;
};

/// Projection of a trajectory through a coordinate map; same segment
/// structure as the source trajectory.
struct CoordPath {
  std::vector<double> times;
  std::vector<Vec> values;
  double horizon = 0.0;

  std::size_t segment_index(double t) const;
  const Vec& value_at(double t) const { return values[segment_index(t)]; }
};

struct SimulateOptions {
  std::uint64_t max_events = 100'000'000;
  std::uint64_t stream = 0;
};

/// Total jump rate q(xi). Throws ModelError (naming the channel) on a
/// negative or non-finite channel rate.
double total_rate(const ChainSpec& spec, const State& state);

/// Drift vector of the coordinate process:
/// sum over channels of (coord(state + jump) - coord(state)) * rate(state).
Vec drift(const ChainSpec& spec, const State& state);

/// Quadratic-variation rate: sum of |coord increment|^2 * rate, Euclidean
/// norm.
double alpha(const ChainSpec& spec, const State& state);

/// sigma_theta(x) = e^{theta |x|} - 1 - theta |x|, evaluated stably for
/// small arguments.
double sigma_theta(double theta, double x);

/// Exponential-moment rate: max over coordinates i of
/// sum_channels sigma_theta(coord increment_i) * rate. When e^{theta dx}
/// overflows, returns a saturated value and sets *overflow.
double phi_exp(const ChainSpec& spec, const State& state, double theta,
               bool* overflow = nullptr);

/// Exact jump-chain / holding-time simulation. Identical
/// (spec, init, t_max, seed, stream) gives a bit-identical trajectory.
Trajectory simulate(const ChainSpec& spec, const State& init, double t_max,
                    std::uint64_t seed, const SimulateOptions& opts = {});

CoordPath project(const Trajectory& traj, const ChainSpec& spec);

/// Exact piecewise-constant integral of f along the path over [0, t0].
double path_integral(const Trajectory& traj, const ObservableFn& f, double t0);

}  // namespace fluidmc
