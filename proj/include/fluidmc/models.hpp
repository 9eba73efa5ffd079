#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fluidmc/ctmc.hpp"
#include "fluidmc/fluid.hpp"

namespace fluidmc::models {

/// A matched chain/flow pair: the chain's drift agrees with (or is
/// quantifiably close to) the field composed with the coordinate map.
struct ModelPair {
  ChainSpec chain;
  FluidModel fluid;
  State init;
};

// -- population-process examples ------------------------------------------

/// Poisson process of rate lambda N, coordinate xi / N; field b = lambda.
ModelPair make_poisson(double lambda, std::int64_t n);

/// M/M/infinity queue: arrivals at rate N, unit service rate per customer,
/// coordinate xi / N; field b(x) = 1 - x.
ModelPair make_mm_inf(double x0, std::int64_t n);

/// Reversible reaction A + B <-> C with forward rate lambda / N and backward
/// rate mu, coordinates (A, B, C) / N. x0 holds the initial concentrations.
ModelPair make_reaction(double lambda, double mu, std::int64_t n, const Vec& x0);

/// Two gangs shooting at rates alpha (gang A) and beta (gang B);
/// field b(x) = (-beta x^2, -alpha x^1).
ModelPair make_gunfight(double alpha, double beta, std::int64_t n, double a0,
                        double b0);

/// Continuous-time branching process with a finite-support offspring law;
/// field b(x) = (mean - 1) x.
ModelPair make_branching(const std::vector<double>& offspring_pmf,
                         std::int64_t n, double x0);

// -- stochastic epidemic ----------------------------------------------------

/// Population N, infection rate lambda, removal rate normalized to 1,
/// initial infective fraction p (N p integral).
struct EpidemicParams {
  std::int64_t n = 0;
  double lambda = 0.0;
  double p = 0.0;

  void validate() const;
};

/// Susceptible/infective counts with coordinate xi / N on U = [0,1]^2;
/// field (-lambda x1 x2, lambda x1 x2 - x2), K = lambda + max(lambda, 1).
ModelPair make_epidemic(const EpidemicParams& params);

/// Rates divided by xi^2 (absorbing once no infectives remain), U = (0,1]^2;
/// field (-lambda x1, lambda x1 - 1). Same terminal-value law for the
/// removed fraction as the plain epidemic.
ModelPair make_epidemic_timechanged(const EpidemicParams& params);

/// The noise budget A = (1 + lambda) e / N under which the Omega events are
/// almost sure for the epidemic (both time scales).
double epidemic_default_a(double lambda, std::int64_t n);

/// C = 18 (lambda + 1) t0 e^{2 K t0 + 1}: the epidemic tube bound reads
/// 4 exp(-N eps^2 / C).
double epidemic_c_constant(double lambda, double t0);

/// Root of tau + (1 - p) e^{-lambda tau} = 1 in (p, 1), by bisection;
/// the limiting final size of the epidemic.
double sir_final_size(double lambda, double p);

// -- viral replication ------------------------------------------------------

/// Genome/template/protein counts (xi^1, xi^2, xi^3). Genomes scale with R,
/// proteins with R N; the corrected scalar coordinate
/// x(xi) = xi^1/R + chi(xi) satisfies beta = b(x(xi)) + Delta(xi)/R with
/// b(x) = lambda (alpha - 1) x - lambda alpha mu nu x^2.
struct ViralParams {
  double alpha = 2.0;
  std::int64_t r = 1;
  std::int64_t n = 1;
  double lambda = 1.0;
  double mu = 1.0;
  double nu = 1.0;
  double x0 = 0.0;

  void validate() const;
};

ModelPair make_viral(const ViralParams& params);

/// Fixed point x_inf = (alpha - 1) / (alpha mu nu) of the limit equation.
double viral_x_inf(const ViralParams& params);

/// The coordinate correction chi(xi).
double viral_chi(const ViralParams& params, const State& state);

/// The drift residual Delta(xi) = R (beta(xi) - b(x(xi))), term by term.
double viral_delta(const ViralParams& params, const State& state);

// -- M/M/infinity auxiliary bounds -----------------------------------------

/// P(sup_{s<=t} X_s >= x0 + log(mu t) + a) <= exp{-a log(mu a / (3 lambda e))}
/// for t >= 1/mu and a >= 3 lambda e^2 / mu; throws outside the precondition.
double mminf_sup_tail(double x0, double lambda, double mu, double t, double a);

/// E exp{theta int_0^t X_s ds} <= (mu/(mu-theta))^{x0}
///   exp{theta/(mu-theta) int_0^t lambda_s ds}, theta in [0, mu).
double mminf_exp_moment(double x0, double lambda, double mu, double theta,
                        double t);
double mminf_exp_moment_path(double x0,
                             const std::function<double(double)>& lambda_t,
                             double mu, double theta, double t);

/// Poisson upper tail: P(X >= x) <= exp{-x log(x / (lambda e))}; returns 1
/// for x <= lambda e.
double poisson_tail_bound(double lambda, double x);

// -- registry for the CLI ----------------------------------------------------

struct ModelFactory {
  std::string name;
  std::vector<std::string> required_params;
  bool offspring_law = false;  // accepts p0..pK offspring keys
  std::function<ModelPair(const std::map<std::string, double>&, std::int64_t)>
      make;
  // (Q, J) for the bounded-jump A selection, when available
  std::function<std::optional<std::pair<double, double>>(
      const std::map<std::string, double>&, std::int64_t)>
      footnote_qj;
  // model-supplied default A, when the model proves its Omega events
  std::function<std::optional<double>(const std::map<std::string, double>&,
                                      std::int64_t)>
      default_a;
};

const std::vector<ModelFactory>& registry();
const ModelFactory& factory(const std::string& name);
ModelPair make_by_name(const std::string& name,
                       const std::map<std::string, double>& params,
                       std::int64_t n);

}  // namespace fluidmc::models
