#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fluidmc/ctmc.hpp"
#include "fluidmc/fluid.hpp"

namespace fluidmc::hg {

/// Degree/weight frequencies per unit of N. p[d] vertices of degree d and
/// q[w] edges of weight w per N, with p[0] = q[0] = 0 and equal first
/// moments m = sum d p_d = sum w q_w.
struct FrequencyVectors {
  std::vector<double> p, q;  // both sized max_index + 1
  double m = 0.0;
  int max_index = 0;  // L

  static FrequencyVectors create(std::vector<double> p, std::vector<double> q);
};

/// Bipartite incidence structure. A deleted edge keeps its id with an empty
/// vertex list, so cores remain comparable with their originals entry by
/// entry.
struct HypergraphInstance {
  std::int64_t scale = 1;  // N
  std::vector<std::vector<int>> edge_vertices;
  std::vector<std::vector<int>> vertex_edges;

  int vertex_count() const { return static_cast<int>(vertex_edges.size()); }
  int edge_count() const { return static_cast<int>(edge_vertices.size()); }
  int degree(int v) const { return static_cast<int>(vertex_edges[v].size()); }
  int weight(int e) const { return static_cast<int>(edge_vertices[e].size()); }
  std::int64_t incidence_count() const;
};

struct GenerateResult {
  HypergraphInstance instance;
  int retries = 0;
};

/// Uniform sample from the set of simple hypergraphs with the prescribed
/// degree and weight sequences: pair half-incidences uniformly and reject the
/// whole sample whenever a vertex repeats within an edge. Conditional on
/// acceptance the sample is exactly uniform.
GenerateResult generate(const FrequencyVectors& freq, std::int64_t n_scale,
                        std::uint64_t seed, std::uint64_t stream = 0,
                        int retry_cap = 10000);

/// The unique maximal sub-hypergraph in which every vertex of positive degree
/// has degree >= k; edges are deleted whole.
HypergraphInstance k_core(const HypergraphInstance& h, int k);

/// Counts xi^{d,d'} (current degree d, original degree d') and xi^w (edges of
/// current weight w) tracked by the peeling chain.
struct PeelState {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> dd;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> w;
  int k = 2;

  std::int64_t light_vertices() const;  // n: vertices of degree 1..k-1
  std::int64_t light_degree() const;    // l
  std::int64_t heavy_degree() const;    // h: total degree of vertices >= k
  std::int64_t total_weight() const;    // m
  std::int64_t weight_pairs() const;    // p: ordered same-edge pairs
  double rate() const;                  // q = m n / l, 0 at termination
};

struct PeelResult {
  std::vector<PeelState> states;   // xi_0 .. xi_T
  std::vector<double> jump_times;  // continuous-time embedding, J_0 = 0
  HypergraphInstance core;
  std::uint64_t seed = 0;
};

/// The randomized core-finding chain: repeatedly pick a uniform vertex of
/// degree 1..k-1 and delete all of its edges; holding times are
/// Exponential(m n / l). The terminal instance is the k-core.
PeelResult peel_chain(const HypergraphInstance& h, int k, std::uint64_t seed,
                      std::uint64_t stream = 0);

/// Size-biased offspring laws lambda_d = (d+1) p_{d+1} / m and
/// sigma_w = (w+1) q_{w+1} / m, indexed from 0.
struct SizeBiased {
  std::vector<double> lambda, sigma;
};
SizeBiased size_biased(const FrequencyVectors& freq);

double sigma_pgf(const FrequencyVectors& freq, double z);
double sigma_pgf_prime(const FrequencyVectors& freq, double z);
double lambda_pgf(const FrequencyVectors& freq, double z);

/// phi(g) = sum_{j >= k-1} sum_d binom(d, j) lambda_d sigma(g)^j
///          (1 - sigma(g))^{d-j}; for k = 2 this equals
/// 1 - lambda(1 - sigma(g)).
double phi_map(double g, const FrequencyVectors& freq, int k);

struct GStar {
  double g = 0.0;
  bool crossing_holds = false;
};

/// g* = sup{g in [0,1] : phi(g) > g} (0 if the set is empty), located by a
/// descending grid scan plus bisection. crossing_holds checks phi(g) > g on a
/// mesh immediately below g* (vacuously true for g* = 0).
GStar g_star(const FrequencyVectors& freq, int k);

/// Core frequencies indexed like PeelState: p(d, d') for 0 <= d <= d'
/// (row 0 holds the complementary frequencies) and q(w) for w >= 0.
struct CoreFrequencies {
  Eigen::MatrixXd p;
  Eigen::VectorXd q;
};

/// The limiting core frequencies: p_bar(d,d') = binom(d',d) s^d (1-s)^{d'-d}
/// p_{d'} with s = sigma(g*), for k <= d <= d'; q_bar(w) = g*^w q_w.
CoreFrequencies limiting_frequencies(const FrequencyVectors& freq, int k,
                                     double g_star_value);

/// Closed-form solution of the peeling flow at time t: x^w = e^{-tw} q_w,
/// x^{d,d'} binomial with success probability sigma(e^{-t}), plus the derived
/// m, p, h and the internal clock tau.
struct PeelingFluid {
  Eigen::MatrixXd x_dd;
  Eigen::VectorXd x_w;
  double m = 0.0, p = 0.0, h = 0.0, tau = 0.0;
};
PeelingFluid fluid_closed_form(const FrequencyVectors& freq, int k, double t);

/// Empirical core frequencies (counts / N) of a core inside its original
/// instance.
CoreFrequencies empirical_core_frequencies(const HypergraphInstance& core,
                                           const HypergraphInstance& original);

/// Edge-list text format: one line per edge, "edge_id v1 v2 ...";
/// deleted edges emit just their id.
void write_edge_list(const HypergraphInstance& h, std::ostream& out);
HypergraphInstance read_edge_list(std::istream& in, std::int64_t n_scale);

/// The peeling flow as a FluidModel on R^D, D = (L-k+1)(L-k+2)/2 + L,
/// for integrator cross-checks. U = {m(x) > max(h(x), m_floor)}.
FluidModel make_peeling_fluid(const FrequencyVectors& freq, int k,
                              double m_floor);
int peeling_dim(const FrequencyVectors& freq, int k);
int peeling_pair_index(const FrequencyVectors& freq, int k, int d, int d2);
int peeling_weight_index(const FrequencyVectors& freq, int k, int w);
Vec pack_closed_form(const FrequencyVectors& freq, int k, double t);

}  // namespace fluidmc::hg
