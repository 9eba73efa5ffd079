#include "fluidmc/bounds.hpp"

#include <algorithm>
#include <cmath>

namespace fluidmc {

namespace {

ErrorBudget make_budget(double eps, double t0, double lipschitz, double a,
                        int dim, Theorem theorem) {
  if (eps <= 0 || t0 <= 0 || a <= 0 || dim <= 0 || lipschitz < 0)
    throw ModelError("error budget requires eps, t0, A > 0, d >= 1, K >= 0");
  ErrorBudget b;
  b.eps = eps;
  b.t0 = t0;
  b.lipschitz = lipschitz;
  b.a = a;
  b.dim = dim;
  b.theorem = theorem;
  b.delta = eps * std::exp(-lipschitz * t0) / 3.0;
  b.theta = b.delta / (a * t0);
  return b;
}

double exp_tail_term(int dim, double delta, double a, double t0) {
  return 2.0 * dim * std::exp(-delta * delta / (2.0 * a * t0));
}

void clamp_bound(ErrorBudget& b) {
  b.vacuous = b.raw_bound >= 1.0;
  b.bound = std::min(1.0, b.raw_bound);
}

}  // namespace

const char* theorem_name(Theorem t) {
  switch (t) {
    case Theorem::kL2: return "L2";
    case Theorem::kExp: return "EXP";
    case Theorem::kTerminal: return "TERMINAL";
    case Theorem::kCoupling: return "COUPLING";
  }
  return "?";
}

const char* theorem_norm(Theorem t) {
  return t == Theorem::kL2 ? "euclidean" : "sup";
}

ErrorBudget budget_l2(double eps, double t0, double lipschitz, double a,
                      int dim) {
  ErrorBudget b = make_budget(eps, t0, lipschitz, a, dim, Theorem::kL2);
  b.raw_bound = 4.0 * a * t0 / (b.delta * b.delta);
  clamp_bound(b);
  return b;
}

ErrorBudget budget_exp(double eps, double t0, double lipschitz, double a,
                       int dim) {
  ErrorBudget b = make_budget(eps, t0, lipschitz, a, dim, Theorem::kExp);
  b.raw_bound = exp_tail_term(dim, b.delta, a, t0);
  clamp_bound(b);
  return b;
}

TerminalBudget budget_terminal(double eps, double t0, double lipschitz, double a,
                               int dim, double rho_eps) {
  if (rho_eps < 0) throw ModelError("rho(eps) must be nonnegative");
  TerminalBudget tb;
  tb.budget = make_budget(eps, t0, lipschitz, a, dim, Theorem::kTerminal);
  tb.budget.raw_bound = exp_tail_term(dim, tb.budget.delta, a, t0);
  clamp_bound(tb.budget);
  tb.radius = eps + rho_eps;
  return tb;
}

AdmissibleA admissible_a(double max_total_rate, double max_jump_sup, double eps,
                         double t0, double lipschitz, double a_cap) {
  if (max_total_rate <= 0 || max_jump_sup <= 0)
    throw ModelError("admissible_a requires Q, J > 0");
  const double delta = eps * std::exp(-lipschitz * t0) / 3.0;
  const double qj2 = max_total_rate * max_jump_sup * max_jump_sup;
  auto deficiency = [&](double a) {
    return a - qj2 * std::exp(delta * max_jump_sup / (a * t0));
  };
  double log_lo = std::log(1e-12), log_hi = std::log(a_cap);
  if (deficiency(a_cap) < 0)
    throw ModelError(
        "no admissible A below cap; increase eps or decrease t0 (or cap)");
  if (deficiency(1e-12) >= 0) return {1e-12, deficiency(1e-12)};
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (log_lo + log_hi);
    if (deficiency(std::exp(mid)) >= 0)
      log_hi = mid;
    else
      log_lo = mid;
  }
  const double a = std::exp(log_hi);
  return {a, deficiency(a)};
}

OmegaReport omega_report(const Trajectory& traj, const ChainSpec& spec,
                         const FluidModel& model, const ErrorBudget& budget) {
  OmegaReport r;
  r.variant = budget.theorem == Theorem::kL2 ? Theorem::kL2 : Theorem::kExp;
  r.threshold01 = budget.delta;
  r.threshold2 = (r.variant == Theorem::kL2)
                     ? budget.a * budget.t0
                     : 0.5 * budget.theta * budget.theta * budget.a * budget.t0;

  // T = first exit of the coordinate path from U (exits happen at jumps)
  r.exit_time = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (!model.domain.inside(spec.coord(traj.states[k]))) {
      r.exit_time = traj.times[k];
      break;
    }
  }
  const double t_end = std::min(r.exit_time, budget.t0);

  const bool euclid = r.variant == Theorem::kL2;
  auto norm_of = [&](const Vec& v) {
    return euclid ? v.norm() : v.lpNorm<Eigen::Infinity>();
  };

  r.initial_deviation = norm_of(spec.coord(traj.states.front()) - model.x0);
  r.omega0 = r.initial_deviation <= r.threshold01;

  r.drift_mismatch_integral = path_integral(
      traj,
      [&](const State& s) {
        return norm_of(drift(spec, s) - model.field(spec.coord(s)));
      },
      t_end);
  r.omega1 = r.drift_mismatch_integral <= r.threshold01;

  if (euclid) {
    r.noise_integral =
        path_integral(traj, [&](const State& s) { return alpha(spec, s); }, t_end);
  } else {
    bool overflow_any = false;
    r.noise_integral = path_integral(
        traj,
        [&](const State& s) {
          bool overflow = false;
          const double v = phi_exp(spec, s, budget.theta, &overflow);
          overflow_any |= overflow;
          return v;
        },
        t_end);
    r.phi_overflow = overflow_any;
  }
  r.omega2 = !r.phi_overflow && r.noise_integral <= r.threshold2;
  return r;
}

double sup_deviation(const CoordPath& path, const FluidPath& fluid, double t0,
                     bool sup_norm) {
  if (t0 > path.horizon + 1e-12 || t0 > fluid.horizon + 1e-12)
    throw std::invalid_argument("sup_deviation: t0 beyond path horizon");
  auto norm_of = [&](const Vec& v) {
    return sup_norm ? v.lpNorm<Eigen::Infinity>() : v.norm();
  };
  double sup = 0.0;
  const double grid = fluid.step > 0 ? fluid.step : t0;
  for (std::size_t k = 0; k < path.values.size(); ++k) {
    const double lo = path.times[k];
    if (lo > t0) break;
    const double hi =
        (k + 1 < path.times.size()) ? std::min(path.times[k + 1], t0) : t0;
    const Vec& x = path.values[k];
    sup = std::max(sup, norm_of(x - fluid.eval(lo)));
    // interior fluid grid times of the segment
    for (double t = (std::floor(lo / grid) + 1) * grid; t < hi; t += grid)
      sup = std::max(sup, norm_of(x - fluid.eval(t)));
    sup = std::max(sup, norm_of(x - fluid.eval(hi)));
  }
  return sup;
}

ExceedanceReport empirical_exceedance(const std::vector<CoordPath>& replicas,
                                      const FluidPath& fluid, double eps,
                                      double t0, bool sup_norm) {
  ExceedanceReport rep;
  rep.replicas = static_cast<int>(replicas.size());
  for (const auto& path : replicas)
    if (sup_deviation(path, fluid, t0, sup_norm) > eps) ++rep.exceed_count;
  if (rep.replicas > 0) {
    rep.fraction = static_cast<double>(rep.exceed_count) / rep.replicas;
    rep.std_error =
        std::sqrt(rep.fraction * (1.0 - rep.fraction) / rep.replicas);
  }
  return rep;
}

}  // namespace fluidmc
