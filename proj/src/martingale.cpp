#include "fluidmc/martingale.hpp"

#include <algorithm>
#include <cmath>

namespace fluidmc {

namespace {

// h(a) = e^a - 1 - a for signed a, stable near 0
double exp_compensator(double a) {
  if (std::abs(a) < 1e-3) {
    return a * a *
           (0.5 + a * (1.0 / 6.0 + a * (1.0 / 24.0 + a * (1.0 / 120.0))));
  }
  return std::expm1(a) - a;
}

struct LocalRates {
  double beta = 0.0;
  double alpha = 0.0;
  double phi = 0.0;
  double tau = 0.0;
};

LocalRates observable_rates(const ChainSpec& spec, const State& state,
                            const ObservableFn& f, double theta) {
  LocalRates out;
  const double f0 = f(state);
  for (const auto& ch : spec.channels) {
    const double r = ch.rate(state);
    if (r <= 0.0) continue;
    const double df = f(state + ch.jump) - f0;
    out.beta += df * r;
    out.alpha += df * df * r;
    out.tau += std::abs(df) * r;
    if (theta != 0.0) out.phi += exp_compensator(theta * df) * r;
  }
  return out;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe out;
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

}  // namespace

CompensatedPath compensate(const Trajectory& traj, const ChainSpec& spec,
                           const ObservableFn& f, double theta, double t0) {
  if (t0 < 0.0) t0 = traj.horizon;
  if (t0 > traj.horizon + 1e-12)
    throw std::invalid_argument("compensate: t0 beyond trajectory horizon");

  CompensatedPath cp;
  cp.theta = theta;
  cp.horizon = t0;
  cp.f_start = f(traj.states.front());
  if (!std::isfinite(cp.f_start))
    throw ModelError("observable is not finite on the initial state");

  double m = 0.0;
  cp.times.push_back(0.0);
  cp.m_before.push_back(0.0);
  cp.m_after.push_back(0.0);

  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const double seg_start = traj.times[k];
    if (seg_start >= t0) break;
    const double seg_end = (k + 1 < traj.times.size())
                               ? std::min(traj.times[k + 1], t0)
                               : t0;
    const auto rates = observable_rates(spec, traj.states[k], f, theta);
    const double len = seg_end - seg_start;
    cp.int_alpha += rates.alpha * len;
    cp.int_phi += rates.phi * len;
    cp.int_tau += rates.tau * len;
    cp.int_beta += rates.beta * len;
    m -= rates.beta * len;  // drift compensation, linear in t
    cp.sup_m = std::max(cp.sup_m, m);
    cp.inf_m = std::min(cp.inf_m, m);

    const bool jump_inside = k + 1 < traj.times.size() && traj.times[k + 1] <= t0;
    if (!jump_inside) break;
    const double df = f(traj.states[k + 1]) - f(traj.states[k]);
    if (!std::isfinite(df))
      throw ModelError("observable is not finite on a visited state");
    cp.times.push_back(traj.times[k + 1]);
    cp.m_before.push_back(m);
    m += df;
    cp.m_after.push_back(m);
    cp.sup_m = std::max(cp.sup_m, m);
    cp.inf_m = std::min(cp.inf_m, m);
  }
  cp.m_end = m;
  cp.sup_abs_m = std::max(cp.sup_m, -cp.inf_m);
  cp.f_end = f(traj.state_at(std::min(t0, traj.horizon)));
  return cp;
}

MeanZeroReport mean_zero_check(const std::vector<CompensatedPath>& paths) {
  std::vector<double> ends;
  ends.reserve(paths.size());
  for (const auto& p : paths) ends.push_back(p.m_end);
  const auto ms = mean_se(ends);
  MeanZeroReport r;
  r.replicas = static_cast<int>(paths.size());
  r.mean = ms.mean;
  r.std_error = ms.se;
  r.within_4se = std::abs(ms.mean) <= 4.0 * ms.se + 1e-15;
  return r;
}

DoobReport doob_check(const std::vector<CompensatedPath>& paths) {
  if (paths.size() < 1000)
    throw std::invalid_argument("doob_check needs at least 1000 replicas");
  std::vector<double> sup2, four_alpha, sup_abs, two_tau, quadratic;
  sup2.reserve(paths.size());
  four_alpha.reserve(paths.size());
  for (const auto& p : paths) {
    sup2.push_back(p.sup_abs_m * p.sup_abs_m);
    four_alpha.push_back(4.0 * p.int_alpha);
    sup_abs.push_back(p.sup_abs_m);
    two_tau.push_back(2.0 * p.int_tau);
    quadratic.push_back(p.m_end * p.m_end - p.int_alpha);
  }
  const auto lhs = mean_se(sup2);
  const auto rhs = mean_se(four_alpha);
  DoobReport r;
  r.replicas = static_cast<int>(paths.size());
  r.mean_sup_m2 = lhs.mean;
  r.se_sup_m2 = lhs.se;
  r.mean_4int_alpha = rhs.mean;
  r.se_4int_alpha = rhs.se;
  const double slack = 3.0 * std::sqrt(lhs.se * lhs.se + rhs.se * rhs.se);
  r.holds = lhs.mean <= rhs.mean + slack + 1e-15;

  const auto first_lhs = mean_se(sup_abs);
  const auto first_rhs = mean_se(two_tau);
  r.mean_sup_abs = first_lhs.mean;
  r.mean_2int_tau = first_rhs.mean;
  r.first_moment_holds =
      first_lhs.mean <=
      first_rhs.mean +
          3.0 * std::sqrt(first_lhs.se * first_lhs.se + first_rhs.se * first_rhs.se) +
          1e-15;

  const auto quad = mean_se(quadratic);
  r.mean_quadratic = quad.mean;
  r.se_quadratic = quad.se;
  r.quadratic_centered = std::abs(quad.mean) <= 4.0 * quad.se + 1e-15;
  return r;
}

ExpReport exp_check(const std::vector<CompensatedPath>& paths, double b,
                    double a) {
  ExpReport r;
  r.b = b;
  r.a = a;
  r.replicas = static_cast<int>(paths.size());
  std::vector<double> zs;
  int exceed = 0;
  for (const auto& p : paths) {
    const double z = std::exp(p.theta * p.m_end - p.int_phi);
    if (!std::isfinite(z)) {
      ++r.overflow_excluded;
    } else {
      zs.push_back(z);
    }
    if (p.theta * p.sup_m > b && p.int_phi <= a) ++exceed;
  }
  const auto zstat = mean_se(zs);
  r.mean_z = zstat.mean;
  r.se_z = zstat.se;
  r.mean_ok = r.overflow_excluded == 0 && zstat.mean <= 1.0 + 3.0 * zstat.se + 1e-15;
  r.prob_exceed = paths.empty() ? 0.0 : static_cast<double>(exceed) / paths.size();
  r.exceed_se = paths.empty()
                    ? 0.0
                    : std::sqrt(r.prob_exceed * (1.0 - r.prob_exceed) /
                                static_cast<double>(paths.size()));
  r.exceed_bound = std::exp(a - b);
  r.tail_ok = r.prob_exceed <= r.exceed_bound + 3.0 * r.exceed_se + 1e-15;
  return r;
}

}  // namespace fluidmc
