#pragma once

#include <vector>

#include "fluidmc/ctmc.hpp"

namespace fluidmc {

/// The compensated process M_t = f(X_t) - f(X_0) - int_0^t beta_f(X_s) ds
/// for a scalar observable f, together with the companion integrals used by
/// the quadratic and exponential estimates. M is piecewise linear between
/// jumps; sup/inf are exact.
struct CompensatedPath {
  std::vector<double> times;     // event times <= horizon, starting at 0
  std::vector<double> m_before;  // left limit of M at times[i]
  std::vector<double> m_after;   // M at times[i]
  double horizon = 0.0;
  double m_end = 0.0;       // M at the horizon
  double sup_m = 0.0;       // sup_{t <= horizon} M_t
  double inf_m = 0.0;
  double sup_abs_m = 0.0;
  double int_alpha = 0.0;   // int_0^horizon alpha_f(X_s) ds
  double int_phi = 0.0;     // int_0^horizon phi_{theta f}(X_s) ds
  double int_tau = 0.0;     // int_0^horizon tau_f(X_s) ds (first-moment rate)
  double int_beta = 0.0;
  double theta = 0.0;
  double f_start = 0.0;
  double f_end = 0.0;
};

/// Exact compensation along a trajectory. theta scales the observable for the
/// exponential companion integral (phi uses the signed increments of theta f).
CompensatedPath compensate(const Trajectory& traj, const ChainSpec& spec,
                           const ObservableFn& f, double theta = 0.0,
                           double t0 = -1.0);

struct MeanZeroReport {
  int replicas = 0;
  double mean = 0.0;
  double std_error = 0.0;
  bool within_4se = false;
};
MeanZeroReport mean_zero_check(const std::vector<CompensatedPath>& paths);

/// Monte Carlo checks of the moment inequalities, each with 3 combined
/// standard errors of slack: E sup |M| <= 2 E int tau, E sup |M|^2 <=
/// 4 E int alpha, and the quadratic compensation M^2 - int alpha centered at
/// zero (4 SE). Requires at least 10^3 replicas.
struct DoobReport {
  int replicas = 0;
  double mean_sup_m2 = 0.0, se_sup_m2 = 0.0;
  double mean_4int_alpha = 0.0, se_4int_alpha = 0.0;
  double mean_sup_abs = 0.0, mean_2int_tau = 0.0;
  bool first_moment_holds = false;
  double mean_quadratic = 0.0, se_quadratic = 0.0;
  bool quadratic_centered = false;
  bool holds = false;
};
DoobReport doob_check(const std::vector<CompensatedPath>& paths);

/// Monte Carlo check of E Z <= 1 for Z = exp(theta M - int phi) and of the
/// exceedance bound P(sup theta M > B, int phi <= A) <= e^{A-B}. Replicas
/// whose Z overflows are excluded and counted.
struct ExpReport {
  int replicas = 0;
  double mean_z = 0.0, se_z = 0.0;
  bool mean_ok = false;
  int overflow_excluded = 0;
  double prob_exceed = 0.0, exceed_se = 0.0;
  double exceed_bound = 0.0;  // e^{A-B}
  bool tail_ok = false;
  double b = 0.0, a = 0.0;
};
ExpReport exp_check(const std::vector<CompensatedPath>& paths, double b,
                    double a);

}  // namespace fluidmc
