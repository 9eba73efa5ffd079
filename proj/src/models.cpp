#include "fluidmc/models.hpp"

#include <algorithm>
#include <cmath>

namespace fluidmc::models {

namespace {

constexpr double kE = 2.718281828459045235360287471352662498;

std::int64_t integral_count(double value, const char* what) {
  const double r = std::round(value);
  if (std::abs(value - r) > 1e-6)
    throw ModelError(std::string(what) + " = " + std::to_string(value) +
                     " must be an integer count");
  return static_cast<std::int64_t>(r);
}

State state2(std::int64_t a, std::int64_t b) {
  State s(2);
  s << a, b;
  return s;
}

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Box box_1d(double lo, double hi) { return Box{vec1(lo), vec1(hi)}; }

CoordFn scaled_coord(std::int64_t n) {
  const double inv = 1.0 / static_cast<double>(n);
  return [inv](const State& s) { return s.cast<double>() * inv; };
}

}  // namespace

ModelPair make_poisson(double lambda, std::int64_t n) {
  if (lambda <= 0 || n < 1) throw ModelError("poisson: lambda > 0, N >= 1");
  ModelPair m;
  m.chain.dim = 1;
  m.chain.coord_dim = 1;
  m.chain.scale_hint = static_cast<double>(n);
  m.chain.coord = scaled_coord(n);
  State up(1);
  up << 1;
  const double rate = lambda * static_cast<double>(n);
  m.chain.channels.push_back({up, [rate](const State&) { return rate; }, "arrival"});
  m.chain.validate();

  m.fluid.dim = 1;
  m.fluid.field = [lambda](const Vec&) { return vec1(lambda); };
  m.fluid.domain = Domain::whole_space(1);
  m.fluid.domain.box = box_1d(0.0, 10.0 * lambda + 10.0);
  m.fluid.lipschitz = 0.0;
  m.fluid.x0 = vec1(0.0);

  m.init = State::Zero(1);
  return m;
}

ModelPair make_mm_inf(double x0, std::int64_t n) {
  if (x0 < 0 || n < 1) throw ModelError("mm_inf: x0 >= 0, N >= 1");
  ModelPair m;
  m.chain.dim = 1;
  m.chain.coord_dim = 1;
  m.chain.scale_hint = static_cast<double>(n);
  m.chain.coord = scaled_coord(n);
  State up(1), down(1);
  up << 1;
  down << -1;
  const double arrival = static_cast<double>(n);
  m.chain.channels.push_back(
      {up, [arrival](const State&) { return arrival; }, "arrival"});
  m.chain.channels.push_back(
      {down, [](const State& s) { return static_cast<double>(s[0]); }, "service"});
  m.chain.validate();

  m.fluid.dim = 1;
  m.fluid.field = [](const Vec& x) { return vec1(1.0 - x[0]); };
  m.fluid.domain = Domain::whole_space(1);
  m.fluid.domain.box = box_1d(0.0, std::max(2.0, 2.0 * x0));
  m.fluid.lipschitz = 1.0;
  m.fluid.x0 = vec1(x0);

  m.init = State(1);
  m.init << integral_count(x0 * static_cast<double>(n), "mm_inf N*x0");
  return m;
}

ModelPair make_reaction(double lambda, double mu, std::int64_t n, const Vec& x0) {
  if (lambda <= 0 || mu <= 0 || n < 1 || x0.size() != 3 || x0.minCoeff() < 0)
    throw ModelError("reaction: lambda, mu > 0, N >= 1, x0 in R^3_+");
  ModelPair m;
  m.chain.dim = 3;
  m.chain.coord_dim = 3;
  m.chain.scale_hint = static_cast<double>(n);
  m.chain.coord = scaled_coord(n);
  State fwd(3), bwd(3);
  fwd << -1, -1, 1;
  bwd << 1, 1, -1;
  const double ln = lambda / static_cast<double>(n);
  m.chain.channels.push_back(
      {fwd,
       [ln](const State& s) { return ln * static_cast<double>(s[0]) * static_cast<double>(s[1]); },
       "bind"});
  m.chain.channels.push_back(
      {bwd, [mu](const State& s) { return mu * static_cast<double>(s[2]); },
       "unbind"});
  m.chain.validate();

  m.fluid.dim = 3;
  m.fluid.field = [lambda, mu](const Vec& x) {
    const double net = mu * x[2] - lambda * x[0] * x[1];
    Vec b(3);
    b << net, net, -net;
    return b;
  };
  // conserved masses bound the reachable set
  const double m1 = x0[0] + x0[2], m2 = x0[1] + x0[2];
  m.fluid.domain = Domain::whole_space(3);
  Vec lo = Vec::Zero(3), hi(3);
  hi << m1, m2, std::min(m1, m2);
  m.fluid.domain.box = Box{lo, hi};
  m.fluid.lipschitz = lambda * (m1 + m2) + mu;
  m.fluid.x0 = x0;

  m.init = State(3);
  for (int i = 0; i < 3; ++i)
    m.init[i] = integral_count(x0[i] * static_cast<double>(n), "reaction N*x0");
  return m;
}

ModelPair make_gunfight(double alpha, double beta, std::int64_t n, double a0,
                        double b0) {
  if (alpha <= 0 || beta <= 0 || n < 1 || a0 < 0 || b0 < 0)
    throw ModelError("gunfight: alpha, beta > 0, N >= 1, a0, b0 >= 0");
  ModelPair m;
  m.chain.dim = 2;
  m.chain.coord_dim = 2;
  m.chain.scale_hint = static_cast<double>(n);
  m.chain.coord = scaled_coord(n);
  State hit_b(2), hit_a(2);
  hit_b << 0, -1;
  hit_a << -1, 0;
  // shooting needs a surviving opponent; the fight absorbs once a side is
  // wiped out
  m.chain.channels.push_back(
      {hit_b,
       [alpha](const State& s) {
         return s[1] >= 1 ? alpha * static_cast<double>(s[0]) : 0.0;
       },
       "a_hits_b"});
  m.chain.channels.push_back(
      {hit_a,
       [beta](const State& s) {
         return s[0] >= 1 ? beta * static_cast<double>(s[1]) : 0.0;
       },
       "b_hits_a"});
  m.chain.validate();

  m.fluid.dim = 2;
  m.fluid.field = [alpha, beta](const Vec& x) {
    Vec b(2);
    b << -beta * x[1], -alpha * x[0];
    return b;
  };
  m.fluid.domain = Domain::whole_space(2);
  Vec lo = Vec::Zero(2), hi(2);
  hi << std::max(a0, 1.0), std::max(b0, 1.0);
  m.fluid.domain.box = Box{lo, hi};
  m.fluid.lipschitz = std::max(alpha, beta);
  m.fluid.x0 = Vec(2);
  m.fluid.x0 << a0, b0;

  m.init = state2(integral_count(a0 * n, "gunfight N*a0"),
                  integral_count(b0 * n, "gunfight N*b0"));
  return m;
}

ModelPair make_branching(const std::vector<double>& offspring_pmf,
                         std::int64_t n, double x0) {
  if (offspring_pmf.empty()) throw ModelError("branching: empty offspring law");
  double total = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < offspring_pmf.size(); ++k) {
    if (offspring_pmf[k] < 0) throw ModelError("branching: negative probability");
    total += offspring_pmf[k];
    mean += static_cast<double>(k) * offspring_pmf[k];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ModelError("branching: offspring law must sum to 1");
  if (n < 1 || x0 < 0) throw ModelError("branching: N >= 1, x0 >= 0");

  ModelPair m;
  m.chain.dim = 1;
  m.chain.coord_dim = 1;
  m.chain.scale_hint = static_cast<double>(n);
  m.chain.coord = scaled_coord(n);
  for (std::size_t k = 0; k < offspring_pmf.size(); ++k) {
    if (k == 1 || offspring_pmf[k] == 0.0) continue;  // k = 1 leaves the state unchanged
    State jump(1);
    jump << static_cast<std::int64_t>(k) - 1;
    const double pk = offspring_pmf[k];
    m.chain.channels.push_back(
        {jump, [pk](const State& s) { return pk * static_cast<double>(s[0]); },
         "offspring_" + std::to_string(k)});
  }
  m.chain.validate();

  m.fluid.dim = 1;
  const double growth = mean - 1.0;
  m.fluid.field = [growth](const Vec& x) { return vec1(growth * x[0]); };
  m.fluid.domain = Domain::whole_space(1);
  m.fluid.domain.box = box_1d(0.0, std::max(1.0, 4.0 * x0));
  m.fluid.lipschitz = std::abs(growth);
  m.fluid.x0 = vec1(x0);

  m.init = State(1);
  m.init << integral_count(x0 * static_cast<double>(n), "branching N*x0");
  return m;
}

void EpidemicParams::validate() const {
  if (n < 1 || lambda <= 0 || p <= 0 || p >= 1)
    throw ModelError("epidemic: N >= 1, lambda > 0, p in (0,1)");
  integral_count(p * static_cast<double>(n), "epidemic N*p");
}

ModelPair make_epidemic(const EpidemicParams& params) {
  params.validate();
  const auto n = params.n;
  const double lambda = params.lambda;
  ModelPair m;
  m.chain.dim = 2;
  m.chain.coord_dim = 2;
  m.chain.scale_hint = static_cast<double>(n);
  m.chain.coord = scaled_coord(n);
  State infect(2), remove(2);
  infect << -1, 1;
  remove << 0, -1;
  const double ln = lambda / static_cast<double>(n);
  m.chain.channels.push_back(
      {infect,
       [ln](const State& s) { return ln * static_cast<double>(s[0]) * static_cast<double>(s[1]); },
       "infection"});
  m.chain.channels.push_back(
      {remove, [](const State& s) { return static_cast<double>(s[1]); },
       "removal"});
  m.chain.validate();

  m.fluid.dim = 2;
  m.fluid.field = [lambda](const Vec& x) {
    Vec b(2);
    b << -lambda * x[0] * x[1], lambda * x[0] * x[1] - x[1];
    return b;
  };
  m.fluid.domain = Domain::from_box(Box{Vec::Zero(2), Vec::Ones(2)});
  m.fluid.lipschitz = lambda + std::max(lambda, 1.0);
  m.fluid.x0 = Vec(2);
  m.fluid.x0 << 1.0 - params.p, params.p;

  const auto infectives = integral_count(params.p * n, "epidemic N*p");
  m.init = state2(n - infectives, infectives);
  return m;
}

ModelPair make_epidemic_timechanged(const EpidemicParams& params) {
  params.validate();
  const auto n = params.n;
  const double lambda = params.lambda;
  if (params.p * static_cast<double>(n) < 1.0)
    throw ModelError("time-changed epidemic needs at least one infective");
  ModelPair m;
  m.chain.dim = 2;
  m.chain.coord_dim = 2;
  m.chain.scale_hint = static_cast<double>(n);
  m.chain.coord = scaled_coord(n);
  State infect(2), remove(2);
  infect << -1, 1;
  remove << 0, -1;
  // original rates divided by the infective fraction x^2 = xi^2/N, which
  // keeps rates of order N and makes the drift equal b(x) exactly; absorbed
  // once the infectives run out. The jump chain is unchanged.
  const double nn = static_cast<double>(n);
  m.chain.channels.push_back(
      {infect,
       [lambda](const State& s) {
         return s[1] >= 1 ? lambda * static_cast<double>(s[0]) : 0.0;
       },
       "infection"});
  m.chain.channels.push_back(
      {remove, [nn](const State& s) { return s[1] >= 1 ? nn : 0.0; },
       "removal"});
  m.chain.validate();

  m.fluid.dim = 2;
  m.fluid.field = [lambda](const Vec& x) {
    Vec b(2);
    b << -lambda * x[0], lambda * x[0] - 1.0;
    return b;
  };
  // U = (0,1]^2; the closed-box distance functions serve the window tests
  m.fluid.domain = Domain::from_box(Box{Vec::Zero(2), Vec::Ones(2)});
  m.fluid.domain.inside = [](const Vec& x) {
    return x[0] > 0.0 && x[0] <= 1.0 && x[1] > 0.0 && x[1] <= 1.0;
  };
  m.fluid.lipschitz = lambda + std::max(lambda, 1.0);
  m.fluid.x0 = Vec(2);
  m.fluid.x0 << 1.0 - params.p, params.p;

  const auto infectives = integral_count(params.p * n, "epidemic N*p");
  m.init = state2(n - infectives, infectives);
  return m;
}

double epidemic_default_a(double lambda, std::int64_t n) {
  return (1.0 + lambda) * kE / static_cast<double>(n);
}

double epidemic_c_constant(double lambda, double t0) {
  const double k = lambda + std::max(lambda, 1.0);
  return 18.0 * (lambda + 1.0) * t0 * std::exp(2.0 * k * t0 + 1.0);
}

double sir_final_size(double lambda, double p) {
  if (lambda <= 0 || p <= 0 || p >= 1)
    throw ModelError("sir_final_size: lambda > 0, p in (0,1)");
  auto g = [&](double tau) {
    return tau + (1.0 - p) * std::exp(-lambda * tau) - 1.0;
  };
  double lo = p, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

void ViralParams::validate() const {
  if (!(alpha > 1.0) || r < 1 || n < r || lambda <= 0 || mu <= 0 || nu <= 0)
    throw ModelError("viral: alpha > 1, R >= 1, N >= R, lambda, mu, nu > 0");
  const double xinf = (alpha - 1.0) / (alpha * mu * nu);
  if (x0 < 0 || x0 > xinf) throw ModelError("viral: x0 in [0, x_inf]");
  integral_count(x0 * static_cast<double>(r), "viral R*x0");
}

double viral_x_inf(const ViralParams& p) {
  return (p.alpha - 1.0) / (p.alpha * p.mu * p.nu);
}

double viral_chi(const ViralParams& p, const State& s) {
  const double r = static_cast<double>(p.r), n = static_cast<double>(p.n);
  const double g = static_cast<double>(s[0]);
  const double t = static_cast<double>(s[1]);
  const double pr = static_cast<double>(s[2]);
  return (p.alpha * t - p.mu * p.nu * g * pr / (r * n) -
          p.alpha * p.mu * p.nu * (g / r) * t) /
         r;
}

double viral_delta(const ViralParams& p, const State& s) {
  const double r = static_cast<double>(p.r), n = static_cast<double>(p.n);
  const double g = static_cast<double>(s[0]);
  const double t = static_cast<double>(s[1]);
  const double pr = static_cast<double>(s[2]);
  const double chi = viral_chi(p, s);
  const double al = p.alpha, la = p.lambda, mu = p.mu, nu = p.nu;
  return la * mu * nu * g * pr / (r * n) + al * la * mu * nu * (t + 1.0) * g / r -
         mu * nu * t * pr / n - al * mu * nu * t * t +
         al * mu * nu * nu * (g / r) * t * (pr / n) +
         mu * nu * nu * (g * pr / (r * n)) * ((g + pr - 1.0) / n) -
         la * (al - 1.0) * r * chi +
         la * al * mu * nu * (2.0 * r * chi * (g / r) + r * chi * chi);
}

ModelPair make_viral(const ViralParams& params) {
  params.validate();
  const double r = static_cast<double>(params.r);
  const double n = static_cast<double>(params.n);
  const double al = params.alpha, la = params.lambda, mu = params.mu,
               nu = params.nu;
  ModelPair m;
  m.chain.dim = 3;
  m.chain.coord_dim = 1;
  m.chain.scale_hint = r;
  const ViralParams p = params;
  m.chain.coord = [p, r](const State& s) {
    return Vec::Constant(1, static_cast<double>(s[0]) / r + viral_chi(p, s));
  };

  auto jump3 = [](std::int64_t a, std::int64_t b, std::int64_t c) {
    State j(3);
    j << a, b, c;
    return j;
  };
  m.chain.channels.push_back(
      {jump3(-1, 1, 0),
       [la](const State& s) { return la * static_cast<double>(s[0]); },
       "genome_to_template"});
  m.chain.channels.push_back(
      {jump3(0, -1, 0),
       [r, al](const State& s) { return r / al * static_cast<double>(s[1]); },
       "template_decay"});
  m.chain.channels.push_back(
      {jump3(1, 0, 0),
       [r](const State& s) { return r * static_cast<double>(s[1]); },
       "genome_production"});
  m.chain.channels.push_back(
      {jump3(0, 0, 1),
       [r, n](const State& s) { return r * n * static_cast<double>(s[1]); },
       "protein_production"});
  m.chain.channels.push_back(
      {jump3(0, 0, -1),
       [r, mu](const State& s) { return r / mu * static_cast<double>(s[2]); },
       "protein_decay"});
  m.chain.channels.push_back(
      {jump3(-1, 0, -1),
       [nu, n](const State& s) {
         return nu * static_cast<double>(s[0]) * static_cast<double>(s[2]) / n;
       },
       "assembly"});
  m.chain.validate();

  const double xinf = viral_x_inf(params);
  m.fluid.dim = 1;
  m.fluid.field = [la, al, mu, nu](const Vec& x) {
    return Vec::Constant(1, la * (al - 1.0) * x[0] -
                                la * al * mu * nu * x[0] * x[0]);
  };
  m.fluid.domain = Domain::from_box(box_1d(0.0, xinf + 1.0));
  m.fluid.lipschitz = la * (al - 1.0) + 2.0 * la * al * mu * nu;
  m.fluid.x0 = vec1(params.x0);

  m.init = State(3);
  m.init << integral_count(params.x0 * r, "viral R*x0"), 0, 0;
  return m;
}

double mminf_sup_tail(double x0, double lambda, double mu, double t, double a) {
  (void)x0;  // the bound does not depend on the start after recentering
  if (lambda <= 0 || mu <= 0) throw ModelError("mminf_sup_tail: lambda, mu > 0");
  if (t < 1.0 / mu)
    throw ModelError("mminf_sup_tail requires t >= 1/mu = " +
                     std::to_string(1.0 / mu));
  const double a_min = 3.0 * lambda * kE * kE / mu;
  if (a < a_min)
    throw ModelError("mminf_sup_tail requires a >= 3 lambda e^2 / mu = " +
                     std::to_string(a_min));
  return std::exp(-a * std::log(mu * a / (3.0 * lambda * kE)));
}

double mminf_exp_moment_path(double x0,
                             const std::function<double(double)>& lambda_t,
                             double mu, double theta, double t) {
  if (theta < 0 || theta >= mu)
    throw ModelError("mminf_exp_moment requires 0 <= theta < mu");
  if (theta == 0.0) return 1.0;
  // composite Simpson for the arrival-rate integral
  const int panels = 20000;
  const double h = t / panels;
  double integral = lambda_t(0.0) + lambda_t(t);
  for (int i = 1; i < panels; ++i)
    integral += lambda_t(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  integral *= h / 3.0;
  return std::pow(mu / (mu - theta), x0) *
         std::exp(theta / (mu - theta) * integral);
}

double mminf_exp_moment(double x0, double lambda, double mu, double theta,
                        double t) {
  if (theta < 0 || theta >= mu)
    throw ModelError("mminf_exp_moment requires 0 <= theta < mu");
  if (theta == 0.0) return 1.0;
  return std::pow(mu / (mu - theta), x0) *
         std::exp(theta / (mu - theta) * lambda * t);
}

double poisson_tail_bound(double lambda, double x) {
  if (x < 0) throw ModelError("poisson_tail_bound: x >= 0");
  if (x <= lambda * kE) return 1.0;
  return std::exp(-x * std::log(x / (lambda * kE)));
}

namespace {

double require_param(const std::map<std::string, double>& params,
                     const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw ModelError("missing model parameter: " + key);
  return it->second;
}

std::vector<ModelFactory> build_registry() {
  std::vector<ModelFactory> reg;

  reg.push_back(
      {"poisson",
       {"lambda"},
       false,
       [](const auto& p, std::int64_t n) {
         return make_poisson(require_param(p, "lambda"), n);
       },
       [](const auto& p, std::int64_t n) -> std::optional<std::pair<double, double>> {
         return std::pair{require_param(p, "lambda") * static_cast<double>(n),
                          1.0 / static_cast<double>(n)};
       },
       [](const auto&, std::int64_t) -> std::optional<double> { return std::nullopt; }});

  reg.push_back(
      {"mm_inf",
       {"x0"},
       false,
       [](const auto& p, std::int64_t n) {
         return make_mm_inf(require_param(p, "x0"), n);
       },
       [](const auto&, std::int64_t) -> std::optional<std::pair<double, double>> {
         return std::nullopt;  // service rate unbounded over the state space
       },
       [](const auto&, std::int64_t) -> std::optional<double> { return std::nullopt; }});

  reg.push_back(
      {"reaction",
       {"lambda", "mu", "x1", "x2", "x3"},
       false,
       [](const auto& p, std::int64_t n) {
         Vec x0(3);
         x0 << require_param(p, "x1"), require_param(p, "x2"),
             require_param(p, "x3");
         return make_reaction(require_param(p, "lambda"), require_param(p, "mu"),
                              n, x0);
       },
       [](const auto& p, std::int64_t n) -> std::optional<std::pair<double, double>> {
         const double m1 = require_param(p, "x1") + require_param(p, "x3");
         const double m2 = require_param(p, "x2") + require_param(p, "x3");
         const double q = require_param(p, "lambda") * m1 * m2 * n +
                          require_param(p, "mu") * std::min(m1, m2) * n;
         return std::pair{q, 1.0 / static_cast<double>(n)};
       },
       [](const auto&, std::int64_t) -> std::optional<double> { return std::nullopt; }});

  reg.push_back(
      {"gunfight",
       {"alpha", "beta", "a0", "b0"},
       false,
       [](const auto& p, std::int64_t n) {
         return make_gunfight(require_param(p, "alpha"), require_param(p, "beta"),
                              n, require_param(p, "a0"), require_param(p, "b0"));
       },
       [](const auto& p, std::int64_t n) -> std::optional<std::pair<double, double>> {
         const double q = (require_param(p, "alpha") * require_param(p, "a0") +
                           require_param(p, "beta") * require_param(p, "b0")) *
                          static_cast<double>(n);
         return std::pair{q, 1.0 / static_cast<double>(n)};
       },
       [](const auto&, std::int64_t) -> std::optional<double> { return std::nullopt; }});

  reg.push_back(
      {"branching",
       {"x0"},
       true,
       [](const auto& p, std::int64_t n) {
         std::vector<double> pmf;
         for (int k = 0;; ++k) {
           auto it = p.find("p" + std::to_string(k));
           if (it == p.end()) break;
           pmf.push_back(it->second);
         }
         if (pmf.empty())
           throw ModelError("branching needs offspring keys p0, p1, ...");
         return make_branching(pmf, n, require_param(p, "x0"));
       },
       [](const auto&, std::int64_t) -> std::optional<std::pair<double, double>> {
         return std::nullopt;  // rates grow with the population
       },
       [](const auto&, std::int64_t) -> std::optional<double> { return std::nullopt; }});

  reg.push_back(
      {"epidemic",
       {"lambda", "p"},
       false,
       [](const auto& p, std::int64_t n) {
         return make_epidemic(
             {n, require_param(p, "lambda"), require_param(p, "p")});
       },
       [](const auto& p, std::int64_t n) -> std::optional<std::pair<double, double>> {
         const double lambda = require_param(p, "lambda");
         return std::pair{(lambda / 4.0 + 1.0) * static_cast<double>(n),
                          1.0 / static_cast<double>(n)};
       },
       [](const auto& p, std::int64_t n) -> std::optional<double> {
         return epidemic_default_a(require_param(p, "lambda"), n);
       }});

  reg.push_back(
      {"epidemic_timechanged",
       {"lambda", "p"},
       false,
       [](const auto& p, std::int64_t n) {
         return make_epidemic_timechanged(
             {n, require_param(p, "lambda"), require_param(p, "p")});
       },
       [](const auto& p, std::int64_t n) -> std::optional<std::pair<double, double>> {
         return std::pair{(require_param(p, "lambda") + 1.0) * static_cast<double>(n),
                          1.0 / static_cast<double>(n)};
       },
       [](const auto& p, std::int64_t n) -> std::optional<double> {
         return epidemic_default_a(require_param(p, "lambda"), n);
       }});

  reg.push_back(
      {"viral",
       {"alpha", "R", "lambda", "mu", "nu", "x0"},
       false,
       [](const auto& p, std::int64_t n) {
         ViralParams vp;
         vp.alpha = require_param(p, "alpha");
         vp.r = static_cast<std::int64_t>(require_param(p, "R"));
         vp.n = n;
         vp.lambda = require_param(p, "lambda");
         vp.mu = require_param(p, "mu");
         vp.nu = require_param(p, "nu");
         vp.x0 = require_param(p, "x0");
         return make_viral(vp);
       },
       [](const auto&, std::int64_t) -> std::optional<std::pair<double, double>> {
         // unbounded fast variables; supply A explicitly (A = a/R pattern)
         return std::nullopt;
       },
       [](const auto&, std::int64_t) -> std::optional<double> { return std::nullopt; }});

  return reg;
}

}  // namespace

const std::vector<ModelFactory>& registry() {
  static const std::vector<ModelFactory> reg = build_registry();
  return reg;
}

const ModelFactory& factory(const std::string& name) {
  for (const auto& f : registry())
    if (f.name == name) return f;
  throw ModelError("unknown model: " + name);
}

ModelPair make_by_name(const std::string& name,
                       const std::map<std::string, double>& params,
                       std::int64_t n) {
  return factory(name).make(params, n);
}

}  // namespace fluidmc::models
