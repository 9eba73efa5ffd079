#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fluidmc/bounds.hpp"
#include "fluidmc/ctmc.hpp"
#include "fluidmc/fluid.hpp"
#include "fluidmc/models.hpp"

namespace fluidmc {

using Label = std::int64_t;

/// Target dynamics for a derived process y(X_t): a countable label set
/// (encoded as integers), fluid-modulated rates g(x, y, y'), and the data
/// needed to simulate by thinning. `label_rate_bound(y)` must dominate
/// sum_{y' != y} g(x_t, y, y') for all t in [0, t0].
struct ModulationSpec {
  std::function<Label(const State&)> label_of;
  std::function<double(const Vec&, Label, Label)> target_rate;
  std::function<std::vector<Label>(Label)> label_neighbors;
  std::function<double(Label)> label_rate_bound;
  std::function<bool(Label)> in_restricted;  // I_0 membership; default: all
  double big_g = 0.0;   // G, the drift mismatch allowance
  double kappa = 0.0;   // modulus of g over the eps-tube
  bool kappa_estimated = false;
};

/// Joint (state, label) path. Before `decouple_time` the label component
/// equals label_of(state) at every event.
struct CoupledTrajectory {
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<State> states;
  std::vector<Label> labels;
  double horizon = 0.0;
  double decouple_time = std::numeric_limits<double>::infinity();
  double tau = 0.0;  // first exit of (y_t) from I_0, capped at the horizon
};

/// gamma(xi, y') = total rate of jumps from `state` into label class y'.
double coupling_gamma(const ChainSpec& spec, const ModulationSpec& mod,
                      const State& state, Label to);

struct JointMove {
  State state;
  Label label;
  double rate;
};

/// The five-case joint kernel of the coupled chain at time t. Marginals over
/// the label give the original chain rates; marginals over the state give
/// g_t(y, y').
std::vector<JointMove> coupled_kernel(const ChainSpec& spec,
                                      const ModulationSpec& mod,
                                      const State& state, Label label, double t,
                                      const FluidPath& fluid);

/// Exact time-inhomogeneous simulation of the joint chain by thinning against
/// the envelope q(state) + label_rate_bound(label).
CoupledTrajectory simulate_coupled(const ChainSpec& spec,
                                   const ModulationSpec& mod, const State& init,
                                   const FluidPath& fluid, double t0,
                                   std::uint64_t seed,
                                   const SimulateOptions& opts = {});

/// The label chain (y_t) alone, with jump rates g(x_t, y, y').
struct LabelPath {
  std::vector<double> times;
  std::vector<Label> labels;
  double horizon = 0.0;
  Label label_at(double t) const;
};
LabelPath simulate_labels(const ModulationSpec& mod, Label y0,
                          const FluidPath& fluid, double t0, std::uint64_t seed,
                          const SimulateOptions& opts = {});

/// min(1, (G + kappa) t0 + 2 d exp(-delta^2 / (2 A t0))); with G = kappa = 0
/// this equals the exponential tube bound bit for bit.
double decoupling_bound(double big_g, double kappa, double t0, int dim,
                        double delta, double a);
double decoupling_bound(double big_g, double kappa, double t0,
                        const ErrorBudget& exp_budget);

/// Grid estimate of kappa = sup_{t <= t0} sup_{||x - x_t|| <= eps, y}
/// sum_{y'} |g(x, y, y') - g(x_t, y, y')| over the given labels, sampling the
/// sup-ball at corners and random interior points. Callers should flag the
/// modulation `kappa_estimated`.
double estimate_kappa(const ModulationSpec& mod, const FluidPath& fluid,
                      double t0, double eps, const std::vector<Label>& labels,
                      int samples_per_node = 32, std::uint64_t seed = 0);

// -- the epidemic individual coupling ----------------------------------------

/// Single-individual target rates: susceptible -> infective at lambda x^2,
/// infective -> removed at 1.
double epidemic_individual_rate(double lambda, const Vec& x, int from, int to);

Label encode_individual_labels(const std::vector<int>& states);
std::vector<int> decode_individual_labels(Label label, int k);

/// The epidemic with the first k individuals tracked: state
/// (xi^1, xi^2, eta_1..eta_k) with eta_j in {1,2,3}. The aggregate marginal
/// is the plain epidemic; the tracked block drives the label map. The first
/// k individuals start susceptible.
struct IndividualEpidemic {
  models::ModelPair model;
  ModulationSpec modulation;
  int k = 0;
};
IndividualEpidemic make_epidemic_individuals(const models::EpidemicParams& params,
                                             int k, double eps);

}  // namespace fluidmc
