#include "fluidmc/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace fluidmc::hg {

namespace {

std::int64_t integral_count(double value, const char* what) {
  const double r = std::round(value);
  if (std::abs(value - r) > 1e-6)
    throw ModelError(std::string(what) + " = " + std::to_string(value) +
                     " must be an integer count");
  return static_cast<std::int64_t>(r);
}

double binom(int n, int j) {
  double c = 1.0;
  for (int i = 0; i < j; ++i) c = c * (n - i) / (i + 1);
  return c;
}

// sum_{j >= j0} binom(d, j) s^j (1-s)^{d-j}
double binomial_tail(int d, int j0, double s) {
  double tail = 0.0;
  for (int j = std::max(j0, 0); j <= d; ++j)
    tail += binom(d, j) * std::pow(s, j) * std::pow(1.0 - s, d - j);
  return tail;
}

}  // namespace

FrequencyVectors FrequencyVectors::create(std::vector<double> p,
                                          std::vector<double> q) {
  const std::size_t len = std::max(p.size(), q.size());
  if (len == 0) throw ModelError("empty frequency vectors");
  p.resize(len, 0.0);
  q.resize(len, 0.0);
  if (p[0] != 0.0 || q[0] != 0.0)
    throw ModelError("frequency vectors must have p0 = q0 = 0");
  double mp = 0.0, mq = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < len; ++i) {
    if (p[i] < 0 || q[i] < 0) throw ModelError("negative frequency");
    any = any || p[i] > 0 || q[i] > 0;
    mp += static_cast<double>(i) * p[i];
    mq += static_cast<double>(i) * q[i];
  }
  if (!any) throw ModelError("frequency vectors must be non-zero");
  if (std::abs(mp - mq) > 1e-9 * std::max(1.0, mp))
    throw ModelError("degree sum " + std::to_string(mp) +
                     " must equal weight sum " + std::to_string(mq));
  FrequencyVectors f;
  f.p = std::move(p);
  f.q = std::move(q);
  f.m = mp;
  f.max_index = static_cast<int>(len) - 1;
  return f;
}

std::int64_t HypergraphInstance::incidence_count() const {
  std::int64_t total = 0;
  for (const auto& e : edge_vertices) total += static_cast<std::int64_t>(e.size());
  return total;
}

GenerateResult generate(const FrequencyVectors& freq, std::int64_t n_scale,
                        std::uint64_t seed, std::uint64_t stream,
                        int retry_cap) {
  if (n_scale < 1) throw ModelError("generate: N >= 1");
  const int L = freq.max_index;

  std::vector<int> degrees, weights;
  for (int d = 1; d <= L; ++d) {
    const auto count = integral_count(freq.p[d] * static_cast<double>(n_scale),
                                      "generate N*p_d");
    for (std::int64_t i = 0; i < count; ++i) degrees.push_back(d);
  }
  for (int w = 1; w <= L; ++w) {
    const auto count = integral_count(freq.q[w] * static_cast<double>(n_scale),
                                      "generate N*q_w");
    for (std::int64_t i = 0; i < count; ++i) weights.push_back(w);
  }
  const std::int64_t total =
      std::accumulate(degrees.begin(), degrees.end(), std::int64_t{0});

  std::vector<int> vertex_stubs;
  vertex_stubs.reserve(total);
  for (std::size_t v = 0; v < degrees.size(); ++v)
    for (int i = 0; i < degrees[v]; ++i)
      vertex_stubs.push_back(static_cast<int>(v));

  Rng rng(seed, stream);
  GenerateResult out;
  for (int attempt = 0;; ++attempt) {
    if (attempt > retry_cap)
      throw ModelError("generate: retry cap " + std::to_string(retry_cap) +
                       " exceeded (pathological degree sequence?)");
    // Fisher-Yates pairing of vertex stubs with edge slots
    std::vector<int> stubs = vertex_stubs;
    for (std::size_t i = stubs.size(); i > 1; --i)
      std::swap(stubs[i - 1], stubs[rng.bounded(i)]);

    HypergraphInstance h;
    h.scale = n_scale;
    h.edge_vertices.resize(weights.size());
    bool simple = true;
    std::size_t cursor = 0;
    for (std::size_t e = 0; e < weights.size() && simple; ++e) {
      auto& members = h.edge_vertices[e];
      members.assign(stubs.begin() + cursor, stubs.begin() + cursor + weights[e]);
      cursor += weights[e];
      for (std::size_t i = 0; i < members.size() && simple; ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j)
          if (members[i] == members[j]) {
            simple = false;
            break;
          }
    }
    if (!simple) {
      ++out.retries;
      continue;
    }
    h.vertex_edges.resize(degrees.size());
    for (std::size_t e = 0; e < h.edge_vertices.size(); ++e)
      for (int v : h.edge_vertices[e])
        h.vertex_edges[v].push_back(static_cast<int>(e));
    out.instance = std::move(h);
    return out;
  }
}

HypergraphInstance k_core(const HypergraphInstance& h, int k) {
  if (k < 2) throw ModelError("k_core requires k >= 2");
  std::vector<int> degree(h.vertex_count());
  for (int v = 0; v < h.vertex_count(); ++v) degree[v] = h.degree(v);
  std::vector<char> alive(h.edge_count(), 1);
  for (int e = 0; e < h.edge_count(); ++e)
    alive[e] = !h.edge_vertices[e].empty();

  std::vector<int> stack;
  for (int v = 0; v < h.vertex_count(); ++v)
    if (degree[v] > 0 && degree[v] < k) stack.push_back(v);

  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (degree[v] == 0 || degree[v] >= k) continue;
    for (int e : h.vertex_edges[v]) {
      if (!alive[e]) continue;
      alive[e] = 0;
      for (int u : h.edge_vertices[e]) {
        --degree[u];
        if (degree[u] > 0 && degree[u] < k) stack.push_back(u);
      }
    }
  }

  HypergraphInstance core;
  core.scale = h.scale;
  core.edge_vertices.resize(h.edge_count());
  core.vertex_edges.resize(h.vertex_count());
  for (int e = 0; e < h.edge_count(); ++e) {
    if (!alive[e]) continue;
    core.edge_vertices[e] = h.edge_vertices[e];
    for (int v : core.edge_vertices[e]) core.vertex_edges[v].push_back(e);
  }
  return core;
}

std::int64_t PeelState::light_vertices() const {
  std::int64_t n = 0;
  for (int d = 1; d < k; ++d)
    for (int d2 = d; d2 < dd.cols(); ++d2) n += dd(d, d2);
  return n;
}

std::int64_t PeelState::light_degree() const {
  std::int64_t l = 0;
  for (int d = 1; d < k; ++d)
    for (int d2 = d; d2 < dd.cols(); ++d2) l += d * dd(d, d2);
  return l;
}

std::int64_t PeelState::heavy_degree() const {
  std::int64_t h = 0;
  for (int d = k; d < dd.rows(); ++d)
    for (int d2 = d; d2 < dd.cols(); ++d2) h += d * dd(d, d2);
  return h;
}

std::int64_t PeelState::total_weight() const {
  std::int64_t m = 0;
  for (int i = 1; i < w.size(); ++i) m += i * w[i];
  return m;
}

std::int64_t PeelState::weight_pairs() const {
  std::int64_t p = 0;
  for (int i = 1; i < w.size(); ++i) p += static_cast<std::int64_t>(i) * (i - 1) * w[i];
  return p;
}

double PeelState::rate() const {
  const auto l = light_degree();
  if (l == 0) return 0.0;
  return static_cast<double>(total_weight()) *
         static_cast<double>(light_vertices()) / static_cast<double>(l);
}

PeelResult peel_chain(const HypergraphInstance& h, int k, std::uint64_t seed,
                      std::uint64_t stream) {
  if (k < 2) throw ModelError("peel_chain requires k >= 2");
  int max_deg = 0, max_w = 0;
  for (int v = 0; v < h.vertex_count(); ++v) max_deg = std::max(max_deg, h.degree(v));
  for (int e = 0; e < h.edge_count(); ++e) max_w = std::max(max_w, h.weight(e));
  const int L = std::max({max_deg, max_w, k});

  std::vector<int> degree(h.vertex_count()), degree0(h.vertex_count());
  std::vector<char> alive(h.edge_count());
  PeelState xi;
  xi.k = k;
  xi.dd = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(L + 1, L + 1);
  xi.w = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(L + 1);
  for (int v = 0; v < h.vertex_count(); ++v) {
    degree[v] = degree0[v] = h.degree(v);
    xi.dd(degree[v], degree[v]) += 1;
  }
  for (int e = 0; e < h.edge_count(); ++e) {
    alive[e] = !h.edge_vertices[e].empty();
    xi.w[h.weight(e)] += 1;
  }

  // light vertices bucketed by current degree for O(1) uniform choice
  std::vector<std::vector<int>> bucket(k);
  std::vector<int> pos(h.vertex_count(), -1);
  auto bucket_add = [&](int v) {
    pos[v] = static_cast<int>(bucket[degree[v]].size());
    bucket[degree[v]].push_back(v);
  };
  auto bucket_remove = [&](int v, int old_degree) {
    auto& b = bucket[old_degree];
    const int at = pos[v];
    b[at] = b.back();
    pos[b[at]] = at;
    b.pop_back();
    pos[v] = -1;
  };
  for (int v = 0; v < h.vertex_count(); ++v)
    if (degree[v] > 0 && degree[v] < k) bucket_add(v);

  auto decrement_degree = [&](int u) {
    const int old_degree = degree[u];
    if (old_degree > 0 && old_degree < k) bucket_remove(u, old_degree);
    xi.dd(old_degree, degree0[u]) -= 1;
    degree[u] = old_degree - 1;
    xi.dd(degree[u], degree0[u]) += 1;
    if (degree[u] > 0 && degree[u] < k) bucket_add(u);
  };

  Rng rng(seed, stream);
  PeelResult out;
  out.seed = seed;
  out.states.push_back(xi);
  out.jump_times.push_back(0.0);

  double t = 0.0;
  for (;;) {
    std::int64_t light = 0;
    for (int d = 1; d < k; ++d) light += static_cast<std::int64_t>(bucket[d].size());
    if (light == 0) break;

    t += rng.exponential(out.states.back().rate());

    // uniform choice over the light buckets
    std::uint64_t idx = rng.bounded(static_cast<std::uint64_t>(light));
    int v = -1;
    for (int d = 1; d < k; ++d) {
      if (idx < bucket[d].size()) {
        v = bucket[d][idx];
        break;
      }
      idx -= bucket[d].size();
    }

    for (int e : h.vertex_edges[v]) {
      if (!alive[e]) continue;
      alive[e] = 0;
      xi.w[h.weight(e)] -= 1;
      xi.w[0] += 1;
      for (int u : h.edge_vertices[e]) decrement_degree(u);
    }
    out.states.push_back(xi);
    out.jump_times.push_back(t);
  }

  out.core.scale = h.scale;
  out.core.edge_vertices.resize(h.edge_count());
  out.core.vertex_edges.resize(h.vertex_count());
  for (int e = 0; e < h.edge_count(); ++e) {
    if (!alive[e]) continue;
    out.core.edge_vertices[e] = h.edge_vertices[e];
    for (int v : out.core.edge_vertices[e]) out.core.vertex_edges[v].push_back(e);
  }
  return out;
}

SizeBiased size_biased(const FrequencyVectors& freq) {
  SizeBiased sb;
  const int L = freq.max_index;
  sb.lambda.resize(L, 0.0);
  sb.sigma.resize(L, 0.0);
  for (int d = 0; d < L; ++d)
    sb.lambda[d] = (d + 1) * freq.p[d + 1] / freq.m;
  for (int w = 0; w < L; ++w)
    sb.sigma[w] = (w + 1) * freq.q[w + 1] / freq.m;
  return sb;
}

double sigma_pgf(const FrequencyVectors& freq, double z) {
  const auto sb = size_biased(freq);
  double acc = 0.0;
  for (int w = static_cast<int>(sb.sigma.size()) - 1; w >= 0; --w)
    acc = acc * z + sb.sigma[w];
  return acc;
}

double sigma_pgf_prime(const FrequencyVectors& freq, double z) {
  const auto sb = size_biased(freq);
  double acc = 0.0;
  for (int w = static_cast<int>(sb.sigma.size()) - 1; w >= 1; --w)
    acc = acc * z + w * sb.sigma[w];
  return acc;
}

double lambda_pgf(const FrequencyVectors& freq, double z) {
  const auto sb = size_biased(freq);
  double acc = 0.0;
  for (int d = static_cast<int>(sb.lambda.size()) - 1; d >= 0; --d)
    acc = acc * z + sb.lambda[d];
  return acc;
}

double phi_map(double g, const FrequencyVectors& freq, int k) {
  if (g < 0.0 || g > 1.0) throw ModelError("phi_map: g in [0,1]");
  const auto sb = size_biased(freq);
  const double s = sigma_pgf(freq, g);
  double value = 0.0;
  for (std::size_t d = 0; d < sb.lambda.size(); ++d) {
    if (sb.lambda[d] == 0.0) continue;
    value += sb.lambda[d] * binomial_tail(static_cast<int>(d), k - 1, s);
  }
  return value;
}

GStar g_star(const FrequencyVectors& freq, int k) {
  const int grid = 10000;
  double lo = -1.0, hi = 1.0;  // lo: phi > g, hi: phi <= g
  for (int i = 1; i <= grid; ++i) {
    const double g = 1.0 - static_cast<double>(i) / grid;
    if (phi_map(g, freq, k) > g) {
      lo = g;
      hi = 1.0 - static_cast<double>(i - 1) / grid;
      break;
    }
  }
  GStar out;
  if (lo < 0.0) {
    out.g = 0.0;
    out.crossing_holds = true;  // the g* = 0 branch of the case split
    return out;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi_map(mid, freq, k) > mid)
      lo = mid;
    else
      hi = mid;
  }
  out.g = 0.5 * (lo + hi);
  out.crossing_holds = true;
  for (int j = 1; j <= 100; ++j) {
    const double g = out.g - 1e-5 * j;
    if (g < 0.0) break;
    if (!(phi_map(g, freq, k) > g)) {
      out.crossing_holds = false;
      break;
    }
  }
  return out;
}

CoreFrequencies limiting_frequencies(const FrequencyVectors& freq, int k,
                                     double g_star_value) {
  if (g_star_value < 0.0 || g_star_value > 1.0)
    throw ModelError("limiting_frequencies: g* in [0,1]");
  const int L = freq.max_index;
  const double s = sigma_pgf(freq, g_star_value);
  CoreFrequencies out;
  out.p = Eigen::MatrixXd::Zero(L + 1, L + 1);
  out.q = Eigen::VectorXd::Zero(L + 1);
  for (int d2 = k; d2 <= L; ++d2) {
    double kept = 0.0;
    for (int d = k; d <= d2; ++d) {
      out.p(d, d2) =
          binom(d2, d) * std::pow(s, d) * std::pow(1.0 - s, d2 - d) * freq.p[d2];
      kept += out.p(d, d2);
    }
    out.p(0, d2) = freq.p[d2] - kept;
  }
  for (int d2 = 1; d2 < k && d2 <= L; ++d2) out.p(0, d2) = freq.p[d2];
  double q_kept = 0.0, q_all = 0.0;
  for (int w = 1; w <= L; ++w) {
    out.q[w] = std::pow(g_star_value, w) * freq.q[w];
    q_kept += out.q[w];
    q_all += freq.q[w];
  }
  out.q[0] = q_all - q_kept;
  return out;
}

PeelingFluid fluid_closed_form(const FrequencyVectors& freq, int k, double t) {
  if (t < 0.0) throw ModelError("fluid_closed_form: t >= 0");
  const int L = freq.max_index;
  const double z = std::exp(-t);
  const double s = sigma_pgf(freq, z);
  PeelingFluid out;
  out.x_dd = Eigen::MatrixXd::Zero(L + 1, L + 1);
  out.x_w = Eigen::VectorXd::Zero(L + 1);
  for (int w = 1; w <= L; ++w) out.x_w[w] = std::exp(-t * w) * freq.q[w];
  for (int d2 = k; d2 <= L; ++d2)
    for (int d = k; d <= d2; ++d)
      out.x_dd(d, d2) =
          binom(d2, d) * std::pow(s, d) * std::pow(1.0 - s, d2 - d) * freq.p[d2];
  out.m = freq.m * z * s;
  out.p = freq.m * z * z * sigma_pgf_prime(freq, z);
  out.h = freq.m * phi_map(z, freq, k) * s;
  out.tau = s > 0.0 ? -std::log(s) : std::numeric_limits<double>::infinity();
  return out;
}

CoreFrequencies empirical_core_frequencies(const HypergraphInstance& core,
                                           const HypergraphInstance& original) {
  if (core.vertex_count() != original.vertex_count() ||
      core.edge_count() != original.edge_count())
    throw ModelError("core/original vertex and edge sets must match");
  int L = 0;
  for (int v = 0; v < original.vertex_count(); ++v)
    L = std::max(L, original.degree(v));
  for (int e = 0; e < original.edge_count(); ++e)
    L = std::max(L, original.weight(e));
  const double inv = 1.0 / static_cast<double>(original.scale);
  CoreFrequencies out;
  out.p = Eigen::MatrixXd::Zero(L + 1, L + 1);
  out.q = Eigen::VectorXd::Zero(L + 1);
  for (int v = 0; v < original.vertex_count(); ++v) {
    if (core.degree(v) > original.degree(v))
      throw ModelError("core is not a sub-hypergraph of the original");
    out.p(core.degree(v), original.degree(v)) += inv;
  }
  for (int e = 0; e < original.edge_count(); ++e) {
    const int w = core.weight(e);
    if (w != 0 && w != original.weight(e))
      throw ModelError("core edge is neither kept whole nor deleted");
    out.q[w] += inv;
  }
  return out;
}

int peeling_pair_index(const FrequencyVectors& freq, int k, int d, int d2) {
  const int L = freq.max_index;
  if (d < k || d2 < d || d2 > L) throw ModelError("pair index out of range");
  // pairs (d, d') with k <= d <= d' <= L, ordered by d then d'
  int idx = 0;
  for (int a = k; a < d; ++a) idx += L - a + 1;
  return idx + (d2 - d);
}

int peeling_weight_index(const FrequencyVectors& freq, int k, int w) {
  const int L = freq.max_index;
  if (w < 1 || w > L) throw ModelError("weight index out of range");
  const int pairs = (L - k + 1) * (L - k + 2) / 2;
  return pairs + (w - 1);
}

int peeling_dim(const FrequencyVectors& freq, int k) {
  const int L = freq.max_index;
  return (L - k + 1) * (L - k + 2) / 2 + L;
}

FluidModel make_peeling_fluid(const FrequencyVectors& freq, int k,
                              double m_floor) {
  if (m_floor <= 0.0) throw ModelError("make_peeling_fluid: m_floor > 0");
  const int L = freq.max_index;
  const int dim = peeling_dim(freq, k);
  const int pairs = (L - k + 1) * (L - k + 2) / 2;

  FluidModel model;
  model.dim = dim;
  model.field = [freq, k, L, pairs](const Vec& x) {
    double m = 0.0, p = 0.0;
    for (int w = 1; w <= L; ++w) {
      const double xw = x[pairs + (w - 1)];
      m += w * xw;
      p += static_cast<double>(w) * (w - 1) * xw;
    }
    const double ratio = p / std::max(m, 1e-12);
    Vec b(x.size());
    int idx = 0;
    for (int d = k; d <= L; ++d)
      for (int d2 = d; d2 <= L; ++d2, ++idx) {
        const double inflow =
            (d + 1 <= d2) ? (d + 1) * x[idx + (L - d)] : 0.0;  // (d+1, d2)
        b[idx] = ratio * (inflow - d * x[idx]);
      }
    for (int w = 1; w <= L; ++w)
      b[pairs + (w - 1)] = -w * x[pairs + (w - 1)];
    return b;
  };
  model.domain.inside = [freq, k, L, pairs, m_floor](const Vec& x) {
    double m = 0.0, h = 0.0;
    for (int w = 1; w <= L; ++w) m += w * x[pairs + (w - 1)];
    int idx = 0;
    for (int d = k; d <= L; ++d)
      for (int d2 = d; d2 <= L; ++d2, ++idx) h += d * x[idx];
    return m > std::max(h, m_floor);
  };
  // first-derivative bound on U
  model.lipschitz = (L - 1.0) * std::pow(static_cast<double>(L), 3) * freq.m / m_floor;
  model.x0 = Vec::Zero(dim);
  for (int d = k; d <= L; ++d)
    model.x0[peeling_pair_index(freq, k, d, d)] = freq.p[d];
  for (int w = 1; w <= L; ++w)
    model.x0[peeling_weight_index(freq, k, w)] = freq.q[w];
  return model;
}

Vec pack_closed_form(const FrequencyVectors& freq, int k, double t) {
  const auto cf = fluid_closed_form(freq, k, t);
  const int L = freq.max_index;
  Vec x = Vec::Zero(peeling_dim(freq, k));
  for (int d = k; d <= L; ++d)
    for (int d2 = d; d2 <= L; ++d2)
      x[peeling_pair_index(freq, k, d, d2)] = cf.x_dd(d, d2);
  for (int w = 1; w <= L; ++w)
    x[peeling_weight_index(freq, k, w)] = cf.x_w[w];
  return x;
}

void write_edge_list(const HypergraphInstance& h, std::ostream& out) {
  for (int e = 0; e < h.edge_count(); ++e) {
    out << e;
    for (int v : h.edge_vertices[e]) out << ' ' << v;
    out << '\n';
  }
}

HypergraphInstance read_edge_list(std::istream& in, std::int64_t n_scale) {
  HypergraphInstance h;
  h.scale = n_scale;
  std::string line;
  int max_vertex = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int edge_id = 0;
    if (!(row >> edge_id) || edge_id != h.edge_count())
      throw ModelError("edge list: ids must be consecutive from 0");
    std::vector<int> members;
    int v;
    while (row >> v) {
      if (v < 0) throw ModelError("edge list: negative vertex id");
      members.push_back(v);
      max_vertex = std::max(max_vertex, v);
    }
    h.edge_vertices.push_back(std::move(members));
  }
  h.vertex_edges.resize(max_vertex + 1);
  for (int e = 0; e < h.edge_count(); ++e)
    for (int v : h.edge_vertices[e]) h.vertex_edges[v].push_back(e);
  return h;
}

}  // namespace fluidmc::hg
