#include "fluidmc/fluid.hpp"

#include <algorithm>
#include <cmath>

namespace fluidmc {

namespace {

constexpr double kTimeResolution = 1e-10;

// Bisection on a boolean predicate: pred(lo) == false, pred(hi) == true.
// Returns the earliest switch time within kTimeResolution.
double bisect_first(const std::function<bool(double)>& pred, double lo,
                    double hi) {
  while (hi - lo > kTimeResolution) {
    const double mid = 0.5 * (lo + hi);
    if (pred(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Earliest time in [0, horizon] at which pred becomes true, scanning the
// path grid and refining between nodes. Returns infinity when never true.
double first_time(const FluidPath& path, const std::function<bool(double)>& pred) {
  if (pred(path.times.front())) return path.times.front();
  for (std::size_t k = 1; k < path.times.size(); ++k) {
    if (pred(path.times[k]))
      return bisect_first(pred, path.times[k - 1], path.times[k]);
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

Domain Domain::whole_space(int dim) {
  (void)dim;
  Domain d;
  d.inside = [](const Vec&) { return true; };
  d.margin = [](const Vec&) { return std::numeric_limits<double>::infinity(); };
  d.outside_distance = [](const Vec&) { return 0.0; };
  return d;
}

Domain Domain::from_box(Box box) {
  Domain d;
  d.box = box;
  d.inside = [box](const Vec& x) { return box.contains(x); };
  d.margin = [box](const Vec& x) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < x.size(); ++i)
      m = std::min(m, std::min(x[i] - box.lo[i], box.hi[i] - x[i]));
    return m;
  };
  d.outside_distance = [box](const Vec& x) {
    double dist = 0.0;
    for (int i = 0; i < x.size(); ++i)
      dist = std::max(dist, std::max(box.lo[i] - x[i], x[i] - box.hi[i]));
    return std::max(dist, 0.0);
  };
  return d;
}

FluidPath integrate(const FluidModel& model, double t_max, double h) {
  if (h <= 0.0) throw IntegrationError("step size must be positive");
  if (t_max < 0.0) throw IntegrationError("t_max must be nonnegative");

  FluidPath path;
  path.step = h;
  path.horizon = t_max;

  const auto& b = model.field;
  auto eval_field = [&](const Vec& x, double t) {
    Vec v = b(x);
    if (!v.allFinite())
      throw IntegrationError("non-finite field value at t=" + std::to_string(t));
    return v;
  };

  Vec x = model.x0;
  path.times.push_back(0.0);
  path.values.push_back(x);
  path.derivs.push_back(eval_field(x, 0.0));

  const auto steps =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t_max / h - 1e-9)));
  if (t_max > 0.0) {
    double t = 0.0;
    for (std::int64_t k = 1; k <= steps; ++k) {
      const double t_next = (k == steps) ? t_max : k * h;
      const double dt = t_next - t;
      const Vec& k1 = path.derivs.back();
      const Vec k2 = eval_field(x + 0.5 * dt * k1, t + 0.5 * dt);
      const Vec k3 = eval_field(x + 0.5 * dt * k2, t + 0.5 * dt);
      const Vec k4 = eval_field(x + dt * k3, t_next);
      x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t = t_next;
      path.times.push_back(t);
      path.values.push_back(x);
      path.derivs.push_back(eval_field(x, t));
    }
  }

  if (model.domain.inside) {
    auto outside_at = [&](double t) { return !model.domain.inside(path.eval(t)); };
    const double exit = first_time(path, outside_at);
    if (std::isfinite(exit)) {
      path.exited = true;
      path.exit_time = exit;
    }
  }
  return path;
}

Vec FluidPath::eval(double t) const {
  if (t < times.front() - 1e-12 || t > horizon + 1e-12)
    throw std::out_of_range("FluidPath::eval outside [0, horizon]");
  t = std::clamp(t, times.front(), times.back());
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t k = (it == times.begin())
                      ? 0
                      : static_cast<std::size_t>(std::distance(times.begin(), it)) - 1;
  if (k + 1 >= times.size()) return values.back();
  const double t0 = times[k], t1 = times[k + 1];
  const double dt = t1 - t0;
  const double s = (t - t0) / dt;
  if (s == 0.0) return values[k];
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * values[k] + (h10 * dt) * derivs[k] + h01 * values[k + 1] +
         (h11 * dt) * derivs[k + 1];
}

ExitWindow exit_window(const FluidModel& model, const FluidPath& path,
                       double eps) {
  if (eps <= 0.0) throw IntegrationError("exit_window requires eps > 0");
  if (!model.domain.margin || !model.domain.outside_distance)
    throw IntegrationError(
        "exit_window needs margin/outside_distance (box domain or custom)");
  if (!path.exited)
    throw IntegrationError("window not bracketed: path does not leave U");

  auto ball_meets_complement = [&](double t) {
    return model.domain.margin(path.eval(t)) <= eps;
  };
  auto ball_outside = [&](double t) {
    return model.domain.outside_distance(path.eval(t)) >= eps;
  };

  ExitWindow w;
  w.zeta_minus = first_time(path, ball_meets_complement);
  w.zeta_plus = first_time(path, ball_outside);
  if (!std::isfinite(w.zeta_minus) || !std::isfinite(w.zeta_plus))
    throw IntegrationError("window not bracketed: horizon too short");

  const Vec x_exit = path.eval(path.exit_time);
  const double span = w.zeta_plus - w.zeta_minus;
  const int n = 1000;
  double rho = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = w.zeta_minus + span * i / n;
    rho = std::max(rho, (path.eval(t) - x_exit).lpNorm<Eigen::Infinity>());
  }
  w.rho = rho;
  return w;
}

ExitWindow exit_window_lattice(const FluidModel& model, const FluidPath& path,
                               double eps, const Vec& lattice_spacing) {
  if (!model.domain.inside)
    throw IntegrationError("lattice exit window needs a domain predicate");
  if (!path.exited)
    throw IntegrationError("window not bracketed: path does not leave U");

  auto for_each_lattice_point =
      [&](const Vec& center, const std::function<bool(const Vec&)>& visit) {
        const int d = static_cast<int>(center.size());
        std::vector<std::int64_t> lo(d), hi(d), idx(d);
        std::int64_t count = 1;
        for (int i = 0; i < d; ++i) {
          lo[i] = static_cast<std::int64_t>(
              std::ceil((center[i] - eps) / lattice_spacing[i] - 1e-12));
          hi[i] = static_cast<std::int64_t>(
              std::floor((center[i] + eps) / lattice_spacing[i] + 1e-12));
          if (hi[i] < lo[i]) return;  // ball contains no lattice point
          count *= hi[i] - lo[i] + 1;
          if (count > 2'000'000)
            throw IntegrationError("lattice ball enumeration too large");
          idx[i] = lo[i];
        }
        Vec p(d);
        for (;;) {
          for (int i = 0; i < d; ++i) p[i] = idx[i] * lattice_spacing[i];
          if (!visit(p)) return;  // early stop
          int i = 0;
          while (i < d && ++idx[i] > hi[i]) idx[i] = lo[i], ++i;
          if (i == d) return;
        }
      };

  auto some_lattice_outside = [&](double t) {
    const Vec c = path.eval(t);
    bool found = false;
    for_each_lattice_point(c, [&](const Vec& p) {
      if (!model.domain.inside(p)) {
        found = true;
        return false;
      }
      return true;
    });
    return found;
  };
  auto all_lattice_outside = [&](double t) {
    const Vec c = path.eval(t);
    bool all_out = true;
    for_each_lattice_point(c, [&](const Vec& p) {
      if (model.domain.inside(p)) {
        all_out = false;
        return false;
      }
      return true;
    });
    return all_out;
  };

  ExitWindow w;
  w.zeta_minus = first_time(path, some_lattice_outside);
  w.zeta_plus = first_time(path, all_lattice_outside);
  if (!std::isfinite(w.zeta_minus) || !std::isfinite(w.zeta_plus))
    throw IntegrationError("window not bracketed: horizon too short");

  const Vec x_exit = path.eval(path.exit_time);
  const double span = w.zeta_plus - w.zeta_minus;
  double rho = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double t = w.zeta_minus + span * i / 1000;
    rho = std::max(rho, (path.eval(t) - x_exit).lpNorm<Eigen::Infinity>());
  }
  w.rho = rho;
  return w;
}

double max_refinement_gap(const FluidModel& model, const FluidPath& path) {
  const FluidPath fine = integrate(model, path.horizon, path.step / 2.0);
  double gap = 0.0;
  for (std::size_t k = 0; k < path.times.size(); ++k)
    gap = std::max(gap, (fine.eval(path.times[k]) - path.values[k])
                            .lpNorm<Eigen::Infinity>());
  return gap;
}

double estimate_lipschitz(const FluidModel& model, int sample_count,
                          std::uint64_t seed) {
  if (!model.domain.box)
    throw ModelError(
        "estimate_lipschitz requires a bounded box; supply lipschitz_K "
        "explicitly for unbounded domains");
  const Box& box = *model.domain.box;
  const int d = model.dim;
  Rng rng(seed, 0);
  auto sample_point = [&]() {
    Vec x(d);
    for (int i = 0; i < d; ++i)
      x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * rng.unit();
    return x;
  };

  double best = 0.0;
  for (int s = 0; s < sample_count; ++s) {
    const Vec x = sample_point();
    Vec y;
    if (s % 2 == 0) {
      y = sample_point();
    } else {
      // short offset toward a random corner direction; sharpens the
      // estimate for smooth fields
      y = x;
      const double scale = 0.02 * rng.unit_positive();
      for (int i = 0; i < d; ++i) {
        const double step = scale * (box.hi[i] - box.lo[i]);
        y[i] = std::clamp(x[i] + (rng.next_u64() & 1 ? step : -step), box.lo[i],
                          box.hi[i]);
      }
    }
    const double dist = (x - y).lpNorm<Eigen::Infinity>();
    if (dist < 1e-14) continue;
    const double ratio =
        (model.field(x) - model.field(y)).lpNorm<Eigen::Infinity>() / dist;
    best = std::max(best, ratio);
  }
  return 1.2 * best;
}

}  // namespace fluidmc
