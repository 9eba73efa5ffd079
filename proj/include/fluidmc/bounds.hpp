#pragma once

#include <vector>

#include "fluidmc/ctmc.hpp"
#include "fluidmc/fluid.hpp"

namespace fluidmc {

enum class Theorem { kL2, kExp, kTerminal, kCoupling };

const char* theorem_name(Theorem t);

/// Norm semantics: kL2 budgets are stated in the Euclidean norm, all others
/// in the supremum norm.
const char* theorem_norm(Theorem t);

/// The (eps, t0, K, A) budget with its derived quantities
/// delta = eps e^{-K t0} / 3 and theta = delta / (A t0), plus the analytic
/// probability term. `bound` is clamped to [0,1]; `raw_bound` keeps the
/// unclamped value and `vacuous` marks raw_bound >= 1.
struct ErrorBudget {
  double eps = 0.0;
  double t0 = 0.0;
  double lipschitz = 0.0;
  double a = 0.0;
  int dim = 0;
  double delta = 0.0;
  double theta = 0.0;
  double raw_bound = 0.0;
  double bound = 0.0;
  bool vacuous = false;
  Theorem theorem = Theorem::kExp;
};

/// L2 tube bound: 4 A t0 / delta^2 (plus the unquantified Omega failure term,
/// which is reported separately via omega_report).
ErrorBudget budget_l2(double eps, double t0, double lipschitz, double a, int dim);

/// Exponential tube bound: 2 d exp(-delta^2 / (2 A t0)).
ErrorBudget budget_exp(double eps, double t0, double lipschitz, double a, int dim);

struct TerminalBudget {
  double radius = 0.0;  // eps + rho(eps)
  ErrorBudget budget;
};

/// Terminal-value bound: the exponential bound reported against the inflated
/// radius eps + rho(eps). Caller must have checked t0 > zeta_eps_plus.
TerminalBudget budget_terminal(double eps, double t0, double lipschitz, double a,
                               int dim, double rho_eps);

struct AdmissibleA {
  double a = 0.0;
  double residual = 0.0;  // a - Q J^2 exp(delta J / (a t0)) >= 0
};

/// Smallest A (bisection on log A over [1e-12, a_cap], 200 iterations)
/// with A >= Q J^2 exp(delta J / (A t0)), which suffices for Omega_2 to be
/// almost sure when jumps are bounded by J and rates by Q.
AdmissibleA admissible_a(double max_total_rate, double max_jump_sup, double eps,
                         double t0, double lipschitz, double a_cap = 1e6);

/// Per-trajectory evaluation of the Omega events against a budget. The
/// thresholds are taken verbatim from the budget fields (delta for
/// Omega_0/Omega_1; A t0 for L2 and theta^2 A t0 / 2 for the exponential
/// variant).
struct OmegaReport {
  Theorem variant = Theorem::kExp;
  bool omega0 = false, omega1 = false, omega2 = false;
  double initial_deviation = 0.0;
  double drift_mismatch_integral = 0.0;
  double noise_integral = 0.0;
  double threshold01 = 0.0;
  double threshold2 = 0.0;
  double exit_time = 0.0;  // first exit of the coordinate path from U
  bool phi_overflow = false;
};

OmegaReport omega_report(const Trajectory& traj, const ChainSpec& spec,
                         const FluidModel& model, const ErrorBudget& budget);

/// sup_{t <= t0} ||X_t - x_t||, evaluated at all jump times (both limits) and
/// fluid grid times. Supremum norm by default, Euclidean otherwise.
double sup_deviation(const CoordPath& path, const FluidPath& fluid, double t0,
                     bool sup_norm = true);

struct ExceedanceReport {
  int exceed_count = 0;
  int replicas = 0;
  double fraction = 0.0;
  double std_error = 0.0;  // binomial standard error of the fraction
};

/// Fraction of replicas whose sup deviation from the fluid path over [0, t0]
/// exceeds eps.
ExceedanceReport empirical_exceedance(const std::vector<CoordPath>& replicas,
                                      const FluidPath& fluid, double eps,
                                      double t0, bool sup_norm = true);

}  // namespace fluidmc
