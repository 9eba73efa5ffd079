#include "fluidmc/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fluidmc {

double coupling_gamma(const ChainSpec& spec, const ModulationSpec& mod,
                      const State& state, Label to) {
  double total = 0.0;
  for (const auto& ch : spec.channels) {
    const double r = ch.rate(state);
    if (r > 0.0 && mod.label_of(state + ch.jump) == to) total += r;
  }
  return total;
}

std::vector<JointMove> coupled_kernel(const ChainSpec& spec,
                                      const ModulationSpec& mod,
                                      const State& state, Label label, double t,
                                      const FluidPath& fluid) {
  const Vec x_t = fluid.eval(t);
  const Label own = mod.label_of(state);
  std::vector<JointMove> moves;

  if (label == own) {
    // gamma per destination class, for the thinning factors
    std::map<Label, double> gamma;
    for (const auto& ch : spec.channels) {
      const double r = ch.rate(state);
      if (r <= 0.0) continue;
      gamma[mod.label_of(state + ch.jump)] += r;
    }
    for (const auto& ch : spec.channels) {
      const double r = ch.rate(state);
      if (r <= 0.0) continue;
      State next = state + ch.jump;
      const Label next_class = mod.label_of(next);
      if (next_class == own) {
        moves.push_back({std::move(next), own, r});
      } else {
        const double g = mod.target_rate(x_t, own, next_class);
        const double gam = gamma.at(next_class);  // >= r > 0 by construction
        const double follow = std::min(1.0, g / gam);
        if (follow > 0.0) moves.push_back({next, next_class, r * follow});
        const double stay = std::max(0.0, 1.0 - g / gam);
        if (stay > 0.0) moves.push_back({std::move(next), own, r * stay});
      }
    }
    for (Label to : mod.label_neighbors(own)) {
      if (to == own) continue;
      const double g = mod.target_rate(x_t, own, to);
      auto it = gamma.find(to);
      const double gam = it == gamma.end() ? 0.0 : it->second;
      const double extra = std::max(0.0, g - gam);
      if (extra > 0.0) moves.push_back({state, to, extra});
    }
  } else {
    // already decoupled: the two marginals run independently
    for (const auto& ch : spec.channels) {
      const double r = ch.rate(state);
      if (r > 0.0) moves.push_back({state + ch.jump, label, r});
    }
    for (Label to : mod.label_neighbors(label)) {
      if (to == label) continue;
      const double g = mod.target_rate(x_t, label, to);
      if (g > 0.0) moves.push_back({state, to, g});
    }
  }
  return moves;
}

CoupledTrajectory simulate_coupled(const ChainSpec& spec,
                                   const ModulationSpec& mod, const State& init,
                                   const FluidPath& fluid, double t0,
                                   std::uint64_t seed,
                                   const SimulateOptions& opts) {
  spec.validate();
  if (!mod.label_of || !mod.target_rate || !mod.label_neighbors ||
      !mod.label_rate_bound)
    throw ModelError("modulation spec is incomplete");
  if (t0 > fluid.horizon + 1e-12)
    throw ModelError("fluid path horizon is shorter than t0");

  auto in_restricted = mod.in_restricted
                           ? mod.in_restricted
                           : std::function<bool(Label)>([](Label) { return true; });

  Rng rng(seed, opts.stream);
  CoupledTrajectory traj;
  traj.seed = seed;
  traj.horizon = t0;

  State x = init;
  Label y = mod.label_of(init);
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.labels.push_back(y);
  traj.tau = in_restricted(y) ? t0 : 0.0;
  bool label_exited = !in_restricted(y);

  double t = 0.0;
  std::uint64_t events = 0;
  for (;;) {
    const double envelope = total_rate(spec, x) + mod.label_rate_bound(y);
    if (envelope <= 0.0) break;
    const double dt = rng.exponential(envelope);
    if (t + dt > t0) break;
    t += dt;

    if (events == opts.max_events)
      throw BudgetExceededError("coupled event budget exceeded", Trajectory{});
    ++events;

    auto moves = coupled_kernel(spec, mod, x, y, t, fluid);
    double rho_total = 0.0;
    for (const auto& m : moves) rho_total += m.rate;
    if (rho_total > envelope * (1.0 + 1e-9))
      throw ModelError("thinning envelope violated; label_rate_bound too small");

    const double u = rng.unit_positive() * envelope;
    if (u > rho_total) continue;  // thinned proposal

    double acc = 0.0;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < moves.size(); ++i) {
      acc += moves[i].rate;
      pick = i;
      if (u <= acc) break;
    }
    x = moves[pick].state;
    y = moves[pick].label;
    traj.times.push_back(t);
    traj.states.push_back(x);
    traj.labels.push_back(y);
    if (!std::isfinite(traj.decouple_time) && mod.label_of(x) != y)
      traj.decouple_time = t;
    if (!label_exited && !in_restricted(y)) {
      label_exited = true;
      traj.tau = t;
    }
  }
  return traj;
}

Label LabelPath::label_at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return labels.front();
  return labels[static_cast<std::size_t>(std::distance(times.begin(), it)) - 1];
}

LabelPath simulate_labels(const ModulationSpec& mod, Label y0,
                          const FluidPath& fluid, double t0, std::uint64_t seed,
                          const SimulateOptions& opts) {
  if (!mod.target_rate || !mod.label_neighbors || !mod.label_rate_bound)
    throw ModelError("modulation spec is incomplete");
  Rng rng(seed, opts.stream);
  LabelPath path;
  path.horizon = t0;
  Label y = y0;
  path.times.push_back(0.0);
  path.labels.push_back(y);

  double t = 0.0;
  std::uint64_t events = 0;
  for (;;) {
    const double envelope = mod.label_rate_bound(y);
    if (envelope <= 0.0) break;
    const double dt = rng.exponential(envelope);
    if (t + dt > t0) break;
    t += dt;
    if (events++ == opts.max_events)
      throw BudgetExceededError("label event budget exceeded", Trajectory{});

    const Vec x_t = fluid.eval(t);
    const auto neighbors = mod.label_neighbors(y);
    double total = 0.0;
    std::vector<double> rates(neighbors.size());
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
      rates[i] = mod.target_rate(x_t, y, neighbors[i]);
      total += rates[i];
    }
    if (total > envelope * (1.0 + 1e-9))
      throw ModelError("thinning envelope violated; label_rate_bound too small");
    const double u = rng.unit_positive() * envelope;
    if (u > total) continue;
    double acc = 0.0;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      acc += rates[i];
      pick = i;
      if (u <= acc) break;
    }
    y = neighbors[pick];
    path.times.push_back(t);
    path.labels.push_back(y);
  }
  return path;
}

double decoupling_bound(double big_g, double kappa, double t0, int dim,
                        double delta, double a) {
  const double tail = 2.0 * dim * std::exp(-delta * delta / (2.0 * a * t0));
  return std::min(1.0, (big_g + kappa) * t0 + tail);
}

double decoupling_bound(double big_g, double kappa, double t0,
                        const ErrorBudget& exp_budget) {
  return decoupling_bound(big_g, kappa, t0, exp_budget.dim, exp_budget.delta,
                          exp_budget.a);
}

double estimate_kappa(const ModulationSpec& mod, const FluidPath& fluid,
                      double t0, double eps, const std::vector<Label>& labels,
                      int samples_per_node, std::uint64_t seed) {
  if (!mod.target_rate || !mod.label_neighbors)
    throw ModelError("modulation spec is incomplete");
  Rng rng(seed, 0);
  double kappa = 0.0;
  for (std::size_t node = 0; node < fluid.times.size(); ++node) {
    if (fluid.times[node] > t0) break;
    const Vec& center = fluid.values[node];
    for (int s = 0; s < samples_per_node; ++s) {
      Vec x = center;
      for (int i = 0; i < x.size(); ++i) {
        // corners of the sup-ball first, then random interior points
        const double offset =
            s % 2 == 0 ? eps : eps * (2.0 * rng.unit() - 1.0);
        x[i] += (rng.next_u64() & 1) ? offset : -offset;
      }
      for (Label y : labels) {
        double total = 0.0;
        for (Label y2 : mod.label_neighbors(y))
          total += std::abs(mod.target_rate(x, y, y2) -
                            mod.target_rate(center, y, y2));
        kappa = std::max(kappa, total);
      }
    }
  }
  return kappa;
}

double epidemic_individual_rate(double lambda, const Vec& x, int from, int to) {
  if (from == 1 && to == 2) return lambda * x[1];
  if (from == 2 && to == 3) return 1.0;
  return 0.0;
}

Label encode_individual_labels(const std::vector<int>& states) {
  Label code = 0;
  Label base = 1;
  for (int s : states) {
    if (s < 1 || s > 3) throw ModelError("individual state must be 1, 2 or 3");
    code += base * (s - 1);
    base *= 3;
  }
  return code;
}

std::vector<int> decode_individual_labels(Label label, int k) {
  std::vector<int> states(k);
  for (int j = 0; j < k; ++j) {
    states[j] = static_cast<int>(label % 3) + 1;
    label /= 3;
  }
  return states;
}

IndividualEpidemic make_epidemic_individuals(const models::EpidemicParams& params,
                                             int k, double eps) {
  params.validate();
  const std::int64_t n = params.n;
  const double lambda = params.lambda;
  const auto infectives = static_cast<std::int64_t>(std::llround(params.p * n));
  if (k < 1 || k > n - infectives)
    throw ModelError("k tracked individuals must fit among the susceptibles");

  IndividualEpidemic out;
  out.k = k;
  auto& chain = out.model.chain;
  chain.dim = 2 + k;
  chain.coord_dim = 2;
  chain.scale_hint = static_cast<double>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  chain.coord = [inv_n](const State& s) {
    Vec x(2);
    x << s[0] * inv_n, s[1] * inv_n;
    return x;
  };

  auto tracked_count = [k](const State& s, int value) {
    std::int64_t count = 0;
    for (int j = 0; j < k; ++j)
      if (s[2 + j] == value) ++count;
    return count;
  };

  auto jump = [&](std::int64_t d1, std::int64_t d2, int j) {
    State v = State::Zero(2 + k);
    v[0] = d1;
    v[1] = d2;
    if (j >= 0) v[2 + j] = 1;
    return v;
  };

  const double ln = lambda * inv_n;
  chain.channels.push_back(
      {jump(-1, 1, -1),
       [ln, tracked_count](const State& s) {
         const double untracked =
             static_cast<double>(s[0] - tracked_count(s, 1));
         return untracked > 0 ? ln * static_cast<double>(s[1]) * untracked : 0.0;
       },
       "infect_untracked"});
  chain.channels.push_back(
      {jump(0, -1, -1),
       [tracked_count](const State& s) {
         const double untracked =
             static_cast<double>(s[1] - tracked_count(s, 2));
         return std::max(untracked, 0.0);
       },
       "remove_untracked"});
  for (int j = 0; j < k; ++j) {
    chain.channels.push_back(
        {jump(-1, 1, j),
         [ln, j](const State& s) {
           return s[2 + j] == 1 ? ln * static_cast<double>(s[1]) : 0.0;
         },
         "infect_tracked_" + std::to_string(j)});
    chain.channels.push_back(
        {jump(0, -1, j),
         [j](const State& s) { return s[2 + j] == 2 ? 1.0 : 0.0; },
         "remove_tracked_" + std::to_string(j)});
  }
  chain.validate();

  // the aggregate marginal carries the usual fluid pair
  auto aggregate = models::make_epidemic(params);
  out.model.fluid = aggregate.fluid;

  out.model.init = State::Zero(2 + k);
  out.model.init[0] = n - infectives;
  out.model.init[1] = infectives;
  for (int j = 0; j < k; ++j) out.model.init[2 + j] = 1;

  auto& mod = out.modulation;
  mod.label_of = [k](const State& s) {
    std::vector<int> tracked(k);
    for (int j = 0; j < k; ++j) tracked[j] = static_cast<int>(s[2 + j]);
    return encode_individual_labels(tracked);
  };
  mod.target_rate = [lambda, k](const Vec& x, Label from, Label to) {
    const auto a = decode_individual_labels(from, k);
    const auto b = decode_individual_labels(to, k);
    int moved = -1;
    for (int j = 0; j < k; ++j) {
      if (a[j] != b[j]) {
        if (moved >= 0) return 0.0;  // product chain: one component at a time
        moved = j;
      }
    }
    if (moved < 0) return 0.0;
    return epidemic_individual_rate(lambda, x, a[moved], b[moved]);
  };
  mod.label_neighbors = [k](Label y) {
    const auto a = decode_individual_labels(y, k);
    std::vector<Label> out_labels;
    for (int j = 0; j < k; ++j) {
      if (a[j] < 3) {
        auto b = a;
        b[j] += 1;
        out_labels.push_back(encode_individual_labels(b));
      }
    }
    return out_labels;
  };
  // x^2 <= 1 on U, so per component g is at most lambda + 1
  mod.label_rate_bound = [k, lambda](Label) {
    return static_cast<double>(k) * (lambda + 1.0);
  };
  mod.big_g = 0.0;  // gamma = g(x(X_t), ...) exactly
  mod.kappa = static_cast<double>(k) * lambda * eps;
  mod.kappa_estimated = false;
  return out;
}

}  // namespace fluidmc
