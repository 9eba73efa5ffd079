#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fluidmc/ctmc.hpp"

namespace fluidmc {

struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Box {
  Vec lo, hi;
  bool contains(const Vec& x) const {
    for (int i = 0; i < x.size(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
};

/// Open-ended description of the domain U. `inside` is authoritative;
/// `margin` (sup-norm distance to the complement, negative outside) and
/// `outside_distance` (sup-norm distance to U) are needed by exit-window
/// computations and are derived automatically for box domains.
struct Domain {
  std::function<bool(const Vec&)> inside;
  std::optional<Box> box;
  std::function<double(const Vec&)> margin;
  std::function<double(const Vec&)> outside_distance;

  static Domain whole_space(int dim);
  static Domain from_box(Box box);
};

/// Vector field b with its domain, a supremum-norm Lipschitz constant and the
/// start point of the flow. The field must be evaluable on all of R^d (builtin
/// models ship a globally Lipschitz extension; generic box domains may clamp).
struct FluidModel {
  int dim = 0;
  std::function<Vec(const Vec&)> field;
  Domain domain;
  double lipschitz = 0.0;
  bool approximate_lipschitz = false;
  Vec x0;
};

/// Fixed-grid solution with cubic-Hermite dense output. `eval` agrees with
/// the stored values exactly at grid times.
struct FluidPath {
  double step = 0.0;
  std::vector<double> times;
  std::vector<Vec> values;
  std::vector<Vec> derivs;
  double horizon = 0.0;
  double exit_time = std::numeric_limits<double>::infinity();
  bool exited = false;

  Vec eval(double t) const;
};

/// Classical RK4 on a fixed grid; domain exit is detected by a predicate sign
/// change between grid nodes and refined by bisection to 1e-10 in time.
FluidPath integrate(const FluidModel& model, double t_max, double h);

struct ExitWindow {
  double zeta_minus = 0.0;
  double zeta_plus = 0.0;
  double rho = 0.0;
};

/// First times at which the closed sup-norm eps-ball around x_t meets,
/// respectively lies inside, the complement of U, plus the flow oscillation
/// rho(eps) over that window. Requires margin/outside_distance (available for
/// box domains) and a path horizon beyond the window.
ExitWindow exit_window(const FluidModel& model, const FluidPath& path,
                       double eps);

/// Variant that tests the eps-ball only at points of the coordinate lattice
/// (spacing per axis); useful when the chain starts on the boundary of U.
ExitWindow exit_window_lattice(const FluidModel& model, const FluidPath& path,
                               double eps, const Vec& lattice_spacing);

/// Sampled sup-norm Lipschitz estimate over the model box, inflated by a 1.2
/// safety factor. Requires a bounded box; callers should flag the model
/// `approximate_lipschitz` when using the result.
double estimate_lipschitz(const FluidModel& model, int sample_count,
                          std::uint64_t seed);

/// On-demand refinement check: the largest change of any grid value when the
/// path is re-integrated at half the step.
double max_refinement_gap(const FluidModel& model, const FluidPath& path);

}  // namespace fluidmc
